"""Volumetry-reproducibility statistics: Wilcoxon + BH, CR/nCR, Dice,
Bland-Altman, the TIV-change exclusion check and the trade-off packing.

Sign convention throughout: differences are original minus anonymized.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateRegionWarning,
    EmptyInput,
    InsufficientData,
    IoError,
    ParseError,
    ShapeMismatch,
)
from .nifti import NiftiImage
from .reid import ReidSummary

CANONICAL_REGIONS = (
    "TIV",
    "CSF",
    "GM",
    "WM",
    "Thalamus",
    "Caudate",
    "Putamen",
    "Pallidum",
    "Hippocampus",
    "Amygdala",
)

EXACT_WILCOXON_MAX_N = 25


@dataclass(frozen=True)
class RegionVolumeTable:
    """Per-(subject, session) absolute region volumes in mL."""

    rows: dict[tuple[str, str], dict[str, float]]
    regions: tuple[str, ...]
    source: str = ""

    def column(self, region: str, keys=None) -> np.ndarray:
        keys = list(self.rows) if keys is None else keys
        return np.array([self.rows[k][region] for k in keys], dtype=np.float64)


def read_volume_table(path, source: str = "") -> RegionVolumeTable:
    """CSV with header subject_id,session_id,<region...>; volumes in mL."""
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header[:2] != ["subject_id", "session_id"]:
            raise ParseError(f"{path}: header must start with subject_id,session_id")
        regions = tuple(h.strip() for h in header[2:])
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                volumes = {r: float(v) for r, v in zip(regions, row[2:])}
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad volume: {exc}") from exc
            rows[(row[0], row[1])] = volumes
    return RegionVolumeTable(rows=rows, regions=regions, source=source)


# --- Wilcoxon signed-rank ----------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    statistic: float  # W+: sum of ranks of positive differences
    n: int  # nonzero differences used
    degenerate: bool = False
    method: str = "exact"


def _signed_midranks(diffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midranks of |d| and the per-tie-group counts (zero diffs removed upstream)."""
    absd = np.abs(diffs)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(len(diffs), dtype=np.float64)
    svals = absd[order]
    i, n = 0, len(diffs)
    tie_counts = []
    while i < n:
        j = i
        while j < n and svals[j] == svals[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)
        tie_counts.append(j - i)
        i = j
    return ranks, np.array(tie_counts)


def _exact_two_sided_p(ranks2: np.ndarray, w2: int) -> float:
    """P(|W - mu| >= |w - mu|) over all sign assignments.

    `ranks2` are the midranks doubled (integers); `w2` the doubled observed
    W+. Convolution over the doubled-rank polynomial enumerates the 2^n
    assignments exactly in integer arithmetic.
    """
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    mu2 = total  # 2*mu where mu = total/2
    dev = abs(2 * w2 - mu2)  # compare 2*W2 - 2*mu scaled by 2 to stay integral
    hits = sum(int(c) for v2, c in enumerate(counts) if abs(2 * v2 - mu2) >= dev)
    return hits / (1 << len(ranks2))


def wilcoxon_signed_rank(before, after) -> WilcoxonResult:
    """Two-sided paired Wilcoxon test, original-vs-anonymized volumes.

    Zero differences are discarded (classic convention). Exact enumeration
    of the 2^n sign assignments for n <= 25; beyond that, the normal
    approximation with tie and continuity correction.
    """
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if before.shape != after.shape:
        raise ShapeMismatch("before/after lengths differ")
    diffs = before - after
    diffs = diffs[diffs != 0]
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(p_value=1.0, statistic=0.0, n=0, degenerate=True, method="degenerate")
    if n < 5:
        raise InsufficientData(f"only {n} nonzero differences; need >= 5")

    ranks, ties = _signed_midranks(diffs)
    w_plus = float(ranks[diffs > 0].sum())

    if n <= EXACT_WILCOXON_MAX_N:
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        p = _exact_two_sided_p(ranks2, int(round(2 * w_plus)))
        return WilcoxonResult(p_value=min(1.0, p), statistic=w_plus, n=n, method="exact")

    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((ties**3 - ties).sum()) / 48.0
    if var <= 0:
        return WilcoxonResult(p_value=1.0, statistic=w_plus, n=n, degenerate=True, method="normal")
    delta = w_plus - mu
    z = (delta - 0.5 * np.sign(delta)) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return WilcoxonResult(p_value=min(1.0, p), statistic=w_plus, n=n, method="normal")


def benjamini_hochberg(pvals, q: float = 0.05) -> tuple[list[float], list[bool]]:
    """Step-up FDR adjustment; returns (adjusted p-values, reject flags)."""
    p = np.asarray(list(pvals), dtype=np.float64)
    if p.size == 0:
        return [], []
    if ((p < 0) | (p > 1)).any():
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m, dtype=np.float64)
    running = 1.0
    for rank in range(m, 0, -1):
        idx = order[rank - 1]
        running = min(running, p[idx] * m / rank)
        adjusted[idx] = running
    return adjusted.tolist(), (adjusted <= q).tolist()


# --- repeatability -----------------------------------------------------------


def coefficient_of_repeatability(diffs) -> float:
    """CR = 1.96 * sample standard deviation of the paired differences."""
    d = np.asarray(list(diffs), dtype=np.float64)
    if d.size < 2:
        raise InsufficientData("need >= 2 paired differences")
    return float(1.96 * d.std(ddof=1))


@dataclass(frozen=True)
class NcrResult:
    ncr: float
    spread: float
    per_region_cr: dict[str, float]
    excluded_regions: tuple[str, ...] = ()


def ncr(original: RegionVolumeTable, anonymized: RegionVolumeTable) -> NcrResult:
    """Normalized CR: min-max scale each region by the ORIGINAL table's range,
    pool the normalized differences across regions, and take one CR.

    The pooled CR treats the pooled differences as the full population
    (1.96 * population sd); per-region CRs use the sample-sd convention of
    coefficient_of_repeatability, and the spread is the population sd
    across those per-region CRs.
    """
    keys = sorted(set(original.rows) & set(anonymized.rows))
    if not keys:
        raise EmptyInput("no common (subject, session) rows")
    regions = [
        r for r in CANONICAL_REGIONS if r in original.regions and r in anonymized.regions
    ] or [r for r in original.regions if r in anonymized.regions]

    pooled = []
    per_region_cr = {}
    excluded = []
    for region in regions:
        o = original.column(region, keys)
        a = anonymized.column(region, keys)
        lo, hi = o.min(), o.max()
        if hi == lo:
            excluded.append(region)
            warnings.warn(
                f"region {region!r} has constant original volumes; excluded from nCR",
                DegenerateRegionWarning,
                stacklevel=2,
            )
            continue
        d = (o - lo) / (hi - lo) - (a - lo) / (hi - lo)
        pooled.append(d)
        per_region_cr[region] = coefficient_of_repeatability(d)
    if not pooled:
        raise EmptyInput("every region was excluded")
    alldiffs = np.concatenate(pooled)
    crs = np.array(list(per_region_cr.values()))
    return NcrResult(
        ncr=float(1.96 * alldiffs.std(ddof=0)),
        spread=float(crs.std(ddof=0)) if crs.size > 1 else 0.0,
        per_region_cr=per_region_cr,
        excluded_regions=tuple(excluded),
    )


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """2|A n B| / (|A| + |B|); two empty masks count as perfect overlap."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} != {b.shape}")
    sa, sb = int(a.sum()), int(b.sum())
    if sa + sb == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / (sa + sb)


def dice_label(seg_a: np.ndarray, seg_b: np.ndarray, label) -> float:
    return dice(np.asarray(seg_a) == label, np.asarray(seg_b) == label)


def mean_dice(seg_a: np.ndarray, seg_b: np.ndarray, labels) -> float:
    """Dice averaged across the given labels of two label maps."""
    labels = list(labels)
    if not labels:
        raise EmptyInput("no labels")
    return float(np.mean([dice_label(seg_a, seg_b, lab) for lab in labels]))


@dataclass(frozen=True)
class BlandAltman:
    mean_diff: float
    loa_low: float
    loa_high: float
    points: tuple[tuple[float, float], ...]  # (pair mean, before - after)
    sd: float


def bland_altman(before, after) -> BlandAltman:
    before = np.asarray(list(before), dtype=np.float64)
    after = np.asarray(list(after), dtype=np.float64)
    if before.shape != after.shape:
        raise ShapeMismatch("before/after lengths differ")
    if before.size < 2:
        raise InsufficientData("need >= 2 pairs")
    diffs = before - after
    means = (before + after) / 2.0
    md = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    half = 1.96 * sd
    return BlandAltman(
        mean_diff=md,
        loa_low=md - half,
        loa_high=md + half,
        points=tuple(zip(means.tolist(), diffs.tolist())),
        sd=sd,
    )


@dataclass(frozen=True)
class C1Result:
    changed_voxels: int
    passed: bool


def check_c1(before: NiftiImage, after: NiftiImage, tiv_mask: np.ndarray) -> C1Result:
    """Exclusion criterion: any voxel change inside the brain (TIV) mask fails."""
    mask = np.asarray(tiv_mask, dtype=bool)
    if not before.dims == after.dims == mask.shape:
        raise ShapeMismatch(
            f"dims differ: before {before.dims}, after {after.dims}, mask {mask.shape}"
        )
    changed = int((before.data[mask] != after.data[mask]).sum())
    return C1Result(changed_voxels=changed, passed=changed == 0)


def flag_outliers(values, k: float = 1.5) -> list[int]:
    """Indices outside the Tukey fences Q1 - k*IQR, Q3 + k*IQR."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size < 4:
        raise InsufficientData("need >= 4 values")
    q1, q3 = np.percentile(v, [25.0, 75.0])
    iqr = q3 - q1
    lo, hi = q1 - k * iqr, q3 + k * iqr
    return [int(i) for i in np.nonzero((v < lo) | (v > hi))[0]]


@dataclass(frozen=True)
class TradeoffPoint:
    """One tool's position in the reproducibility / re-identification plane."""

    tool: str
    ncr: float
    ncr_spread: float
    mean_inverse_distance: float
    inv_dist_spread: float


def tradeoff_point(tool: str, ncr_result: NcrResult, reid: ReidSummary) -> TradeoffPoint:
    return TradeoffPoint(
        tool=tool,
        ncr=ncr_result.ncr,
        ncr_spread=ncr_result.spread,
        mean_inverse_distance=reid.mean_inverse_distance,
        inv_dist_spread=reid.std_inverse_distance,
    )
