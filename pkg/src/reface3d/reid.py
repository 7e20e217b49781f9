"""Re-identification risk metrics over externally computed face embeddings.

Embeddings arrive as plain text, one record per line:
``subject_id,session_id,variant,v0,v1,...`` where variant is ``original`` or
an anonymization tool name. Distances in summaries are canonical (raw cosine
distance in [0, 2]); the x100 reporting scale multiplies the distance
statistics and threshold by 100.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateTies,
    EmptyInput,
    IdenticalFacePairWarning,
    IoError,
    ParseError,
    ZeroVector,
)

DEFAULT_THRESHOLD = 0.4  # cosine facial distance separating same/different subjects
IDENTICAL_EPS = 1e-6


@dataclass(frozen=True)
class EmbeddingRecord:
    subject_id: str
    session_id: str
    variant: str
    vector: np.ndarray


@dataclass(frozen=True)
class ReidSummary:
    n_pairs: int
    mean_distance: float
    std_distance: float
    pct_identifiable: float
    mean_inverse_distance: float
    std_inverse_distance: float
    threshold: float
    scale: str = "raw"

    def to_x100(self) -> "ReidSummary":
        """Distance statistics multiplied by 100, as in published tables."""
        return replace(
            self,
            mean_distance=self.mean_distance * 100.0,
            std_distance=self.std_distance * 100.0,
            threshold=self.threshold * 100.0,
            scale="x100",
        )


def read_embeddings(path) -> list[EmbeddingRecord]:
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 4:
            raise ParseError(f"{path}:{lineno}: need subject,session,variant,v0,...")
        try:
            vec = np.array([float(v) for v in parts[3:]], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad vector component: {exc}") from exc
        records.append(EmbeddingRecord(parts[0], parts[1], parts[2], vec))
    return records


def pair_records(records: list[EmbeddingRecord], tool: str) -> list[tuple[np.ndarray, np.ndarray]]:
    """Match original/anonymized vectors by (subject, session)."""
    originals = {
        (r.subject_id, r.session_id): r.vector for r in records if r.variant == "original"
    }
    pairs = []
    for r in records:
        if r.variant == tool and (r.subject_id, r.session_id) in originals:
            pairs.append((originals[(r.subject_id, r.session_id)], r.vector))
    return pairs


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(angle) in [0, 2]; scale-invariant in either argument."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine distance undefined for zero vectors")
    return float(1.0 - np.dot(a, b) / (na * nb))


def reid_summary(
    pairs: list[tuple[np.ndarray, np.ndarray]],
    threshold: float = DEFAULT_THRESHOLD,
) -> ReidSummary:
    """Distance statistics over (original, anonymized) embedding pairs.

    pct_identifiable counts pairs with distance strictly below the
    threshold. Inverse-distance statistics skip (and warn about) pairs with
    distance <= 1e-6: a zero distance means anonymization failed outright.
    """
    if not pairs:
        raise EmptyInput("no embedding pairs")
    d = np.array([cosine_distance(a, b) for a, b in pairs])
    tiny = d <= IDENTICAL_EPS
    if tiny.any():
        warnings.warn(
            f"{int(tiny.sum())} pair(s) with near-zero face distance",
            IdenticalFacePairWarning,
            stacklevel=2,
        )
    inv = 1.0 / d[~tiny] if (~tiny).any() else np.array([])
    return ReidSummary(
        n_pairs=len(d),
        mean_distance=float(d.mean()),
        std_distance=float(d.std()),  # population: the pairs are the census
        pct_identifiable=float(100.0 * (d < threshold).sum() / len(d)),
        mean_inverse_distance=float(inv.mean()) if inv.size else float("nan"),
        std_inverse_distance=float(inv.std()) if inv.size else float("nan"),
        threshold=threshold,
    )


def kruskal_wallis(groups: list[list[float]]) -> float:
    """Kruskal-Wallis H with midranks and the tie-correction divisor."""
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(groups) < 2 or any(g.size == 0 for g in groups):
        raise EmptyInput("need >= 2 nonempty groups")
    pooled = np.concatenate(groups)
    n = pooled.size
    if n < 3:
        raise EmptyInput("need at least 3 observations in total")
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    sorted_vals = pooled[order]
    i = 0
    tie_sum = 0.0
    while i < n:
        j = i
        while j < n and sorted_vals[j] == sorted_vals[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)  # midrank of positions i..j-1 (1-based)
        t = j - i
        tie_sum += t**3 - t
        i = j
    correction = 1.0 - tie_sum / (n**3 - n)
    if correction == 0.0:
        raise DegenerateTies("all pooled values identical")
    h = 12.0 / (n * (n + 1))
    start = 0
    total = 0.0
    for g in groups:
        r = ranks[start : start + g.size].sum()
        total += r * r / g.size
        start += g.size
    return (h * total - 3.0 * (n + 1)) / correction


def relative_overlap(sample_a, sample_b, bins: int = 50) -> float:
    """Overlap coefficient sum(min(p_i, q_i)) over shared equal-width bins."""
    a = np.asarray(list(sample_a), dtype=np.float64)
    b = np.asarray(list(sample_b), dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise EmptyInput("both samples must be nonempty")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        return 1.0
    pa, _ = np.histogram(a, bins=bins, range=(lo, hi))
    pb, _ = np.histogram(b, bins=bins, range=(lo, hi))
    return float(np.minimum(pa / a.size, pb / b.size).sum())


@dataclass(frozen=True)
class ModelScore:
    name: str
    h_statistic: float
    overlap: float
    rank: int


def select_model(samples: dict[str, tuple[list[float], list[float]]]) -> list[ModelScore]:
    """Rank face-recognition models by correct/incorrect-match separation.

    `samples` maps model name -> (correct-match distances, incorrect-match
    distances). Lower distribution overlap wins; the H statistic breaks
    ties (higher is better).
    """
    if not samples:
        raise EmptyInput("no models to rank")
    scored = []
    for name, (cm, im) in samples.items():
        scored.append(
            (relative_overlap(cm, im), -kruskal_wallis([list(cm), list(im)]), name)
        )
    scored.sort()
    return [
        ModelScore(name=name, h_statistic=-neg_h, overlap=ov, rank=i + 1)
        for i, (ov, neg_h, name) in enumerate(scored)
    ]
