#!/usr/bin/env python3
"""Desk-scale end-to-end run: phantoms -> training -> refacing -> face render.

Everything stays tiny (32-voxel volumes, shallow nets) so the whole loop
finishes in well under a minute on a laptop CPU.
"""

import argparse
import subprocess
import sys
from pathlib import Path


def run(cmd: list[str]) -> None:
    print("+", " ".join(cmd))
    subprocess.run(cmd, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work-dir", type=Path, default=Path("toy_run"))
    parser.add_argument("--epochs", type=int, default=15)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    work = args.work_dir
    phantoms = work / "phantoms"
    run([sys.executable, str(Path(__file__).parent / "make_phantom.py"),
         "--out", str(phantoms), "--count", "2", "--size", "32",
         "--seed", str(args.seed)])

    ckpt_dir = work / "checkpoints"
    run(["reface3d", "train",
         "--pairs-manifest", str(phantoms / "pairs.csv"),
         "--out-dir", str(ckpt_dir),
         "--epochs", str(args.epochs), "--validate-every", "5",
         "--tile", "32", "--levels", "2", "--base-channels", "8",
         "--res-blocks", "2", "--disc-layers", "2", "--disc-channels", "8",
         "--seed", str(args.seed)])

    refaced = work / "phantom_0_refaced.nii"
    run(["reface3d", "reface",
         "--input", str(phantoms / "phantom_0_defaced.nii"),
         "--weights", str(ckpt_dir / "gen_final.rfkw"),
         "--output", str(refaced), "--tile", "32", "--seed", str(args.seed)])

    run(["reface3d", "render-face",
         "--input", str(refaced), "--candidates",
         "--output", str(work / "renders"), "--size", "128"])

    print(f"\ntoy run complete; outputs under {work}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
