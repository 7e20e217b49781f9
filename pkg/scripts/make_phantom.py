#!/usr/bin/env python3
"""Generate synthetic head phantoms (original + defaced) for desk-scale runs.

Writes <out>/phantom_<i>.nii and <out>/phantom_<i>_defaced.nii plus a
training manifest CSV pairing them.
"""

import argparse
from pathlib import Path

import numpy as np

from reface3d.nifti import make_image, write_nifti


def build_phantom(rng: np.random.Generator, n: int) -> np.ndarray:
    x, y, z = np.meshgrid(*[np.arange(n)] * 3, indexing="ij")
    c = rng.uniform(0.45 * n, 0.55 * n, size=3)
    dist = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
    radius = rng.uniform(0.33 * n, 0.42 * n)
    tissue = 700.0 + 6.0 * z + 4.0 * x + rng.uniform(0, 40, size=(n, n, n))
    head = np.where(dist < radius, tissue, 0.0)
    # a brighter "face" bump on the anterior side
    nose = np.sqrt((x - c[0]) ** 2 + (y - (c[1] + radius)) ** 2 + (z - c[2]) ** 2)
    head = np.where(nose < 0.18 * n, 950.0, head)
    return head.astype(np.float32)


def deface(volume: np.ndarray) -> np.ndarray:
    n = volume.shape[0]
    out = volume.copy()
    out[:, int(0.62 * n) :, : int(0.55 * n)] = 0.0  # anterior-inferior wedge
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("phantoms"))
    parser.add_argument("--count", type=int, default=2)
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    manifest = ["defaced,original"]
    for i in range(args.count):
        original = build_phantom(rng, args.size)
        o_path = args.out / f"phantom_{i}.nii"
        d_path = args.out / f"phantom_{i}_defaced.nii"
        write_nifti(make_image(original), o_path)
        write_nifti(make_image(deface(original)), d_path)
        manifest.append(f"{d_path},{o_path}")
        print(f"wrote {o_path} and {d_path}")
    (args.out / "pairs.csv").write_text("\n".join(manifest) + "\n")
    print(f"manifest: {args.out / 'pairs.csv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
