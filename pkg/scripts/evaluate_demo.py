#!/usr/bin/env python3
"""Synthesize evaluation inputs for two mock de-identification tools and run
the full statistics pipeline: volumes, re-id and the trade-off plot.

The mock "gentle" tool perturbs volumes slightly and leaves faces fairly
recognizable; "aggressive" scrambles both. The emitted reports land in
<out>/ as JSON, CSV and SVG.
"""

import argparse
import subprocess
from pathlib import Path

import numpy as np

REGIONS_HEADER = (
    "subject_id,session_id,TIV,CSF,GM,WM,Thalamus,Caudate,Putamen,Pallidum,"
    "Hippocampus,Amygdala"
)
BASE = np.array([1500.0, 350.0, 600.0, 500.0, 15.0, 8.0, 9.0, 3.0, 7.0, 3.0])


def write_tables(out: Path, rng: np.random.Generator, n_subjects: int):
    subjects = []
    lines_orig = [REGIONS_HEADER]
    for i in range(n_subjects):
        vols = BASE * (1.0 + 0.12 * rng.standard_normal())
        subjects.append(vols)
        lines_orig.append(",".join([f"s{i:02d}", "1"] + [f"{v:.4f}" for v in vols]))
    (out / "volumes_original.csv").write_text("\n".join(lines_orig) + "\n")

    for tool, sigma in (("gentle", 0.05), ("aggressive", 2.0)):
        lines = [REGIONS_HEADER]
        for i, vols in enumerate(subjects):
            noisy = vols + sigma * rng.standard_normal(10)
            lines.append(",".join([f"s{i:02d}", "1"] + [f"{v:.4f}" for v in noisy]))
        (out / f"volumes_{tool}.csv").write_text("\n".join(lines) + "\n")
    return len(subjects)


def write_embeddings(out: Path, rng: np.random.Generator, n_subjects: int):
    for tool, angle_lo, angle_hi in (("gentle", 0.15, 0.45), ("aggressive", 0.8, 1.5)):
        lines = []
        for i in range(n_subjects):
            base = rng.normal(size=8)
            base /= np.linalg.norm(base)
            # rotate within the plane spanned by base and a random orthogonal dir
            other = rng.normal(size=8)
            other -= other @ base * base
            other /= np.linalg.norm(other)
            theta = rng.uniform(angle_lo, angle_hi)
            moved = np.cos(theta) * base + np.sin(theta) * other
            lines.append(",".join([f"s{i:02d}", "1", "original"] + [f"{v:.6f}" for v in base]))
            lines.append(",".join([f"s{i:02d}", "1", tool] + [f"{v:.6f}" for v in moved]))
        (out / f"embeddings_{tool}.csv").write_text("\n".join(lines) + "\n")


def run(cmd: list[str]) -> None:
    print("+", " ".join(cmd))
    subprocess.run(cmd, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("evaluation_demo"))
    parser.add_argument("--subjects", type=int, default=24)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    n = write_tables(args.out, rng, args.subjects)
    write_embeddings(args.out, rng, n)

    orig = args.out / "volumes_original.csv"
    for tool in ("gentle", "aggressive"):
        run(["reface3d", "evaluate", "volumes",
             "--original", str(orig),
             "--anonymized", str(args.out / f"volumes_{tool}.csv"),
             "--tool", tool, "--out-dir", str(args.out / f"report_{tool}")])
        run(["reface3d", "evaluate", "reid",
             "--embeddings", str(args.out / f"embeddings_{tool}.csv"),
             "--tool", tool, "--out-dir", str(args.out / f"report_{tool}")])

    specs = [
        f"{tool}={orig}:{args.out / f'volumes_{tool}.csv'}:{args.out / f'embeddings_{tool}.csv'}"
        for tool in ("gentle", "aggressive")
    ]
    run(["reface3d", "evaluate", "tradeoff",
         "--tool", specs[0], "--tool", specs[1],
         "--out-dir", str(args.out / "tradeoff")])

    print(f"\nreports in {args.out}/; trade-off plot at {args.out / 'tradeoff' / 'tradeoff.svg'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
