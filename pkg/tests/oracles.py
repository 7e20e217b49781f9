"""Independent oracles used by the tests.

These deliberately do NOT share code with the package: naive nested loops,
byte-level struct packing and brute-force enumeration, kept simple enough to
audit by eye.
"""

from __future__ import annotations

import struct

import numpy as np

NIFTI_DTYPES = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}
NIFTI_BITPIX = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}


def nifti_fixture_bytes(
    data: np.ndarray,
    dtype_code: int,
    slope: float = 1.0,
    inter: float = 0.0,
    affine: np.ndarray | None = None,
    voxel_size=(1.0, 1.0, 1.0),
    endian: str = "<",
    sizeof_hdr: int = 348,
    magic: bytes = b"n+1\x00",
) -> bytes:
    """Hand-packed single-file NIfTI-1 bytes (header + 4 pad + payload)."""
    nx, ny, nz = data.shape
    hdr = bytearray(348)
    struct.pack_into(endian + "i", hdr, 0, sizeof_hdr)
    struct.pack_into(endian + "8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into(endian + "h", hdr, 70, dtype_code)
    struct.pack_into(endian + "h", hdr, 72, NIFTI_BITPIX[dtype_code])
    struct.pack_into(endian + "8f", hdr, 76, 1.0, *voxel_size, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into(endian + "f", hdr, 108, 352.0)
    struct.pack_into(endian + "f", hdr, 112, slope)
    struct.pack_into(endian + "f", hdr, 116, inter)
    if affine is not None:
        struct.pack_into(endian + "h", hdr, 254, 1)
        struct.pack_into(endian + "4f", hdr, 280, *affine[0])
        struct.pack_into(endian + "4f", hdr, 296, *affine[1])
        struct.pack_into(endian + "4f", hdr, 312, *affine[2])
    struct.pack_into(endian + "4s", hdr, 344, magic)
    payload = np.asarray(data).astype(endian + NIFTI_DTYPES[dtype_code]).tobytes(order="F")
    return bytes(hdr) + b"\x00" * 4 + payload


def nifti_qform_bytes(
    data: np.ndarray,
    quaternion: tuple[float, float, float],
    offset: tuple[float, float, float],
    voxel_size=(1.0, 1.0, 1.0),
    qfac: float = 1.0,
) -> bytes:
    """Fixture with a coded qform (and no sform)."""
    hdr = bytearray(nifti_fixture_bytes(data, 16)[:348])
    struct.pack_into("<8f", hdr, 76, qfac, *voxel_size, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<h", hdr, 252, 1)
    struct.pack_into("<h", hdr, 254, 0)
    struct.pack_into("<3f", hdr, 256, *quaternion)
    struct.pack_into("<3f", hdr, 268, *offset)
    payload = np.asarray(data).astype("<f4").tobytes(order="F")
    return bytes(hdr) + b"\x00" * 4 + payload


def conv3d_naive(x, w, bias=None, stride=1, padding=0):
    """Direct 7-loop cross-correlation on (C, D, H, W) input."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    cin, d, h, ww = x.shape
    cout, cin2, kd, kh, kw = w.shape
    assert cin == cin2
    xp = np.zeros((cin, d + 2 * padding, h + 2 * padding, ww + 2 * padding))
    xp[:, padding : padding + d, padding : padding + h, padding : padding + ww] = x
    od = (d + 2 * padding - kd) // stride + 1
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (ww + 2 * padding - kw) // stride + 1
    out = np.zeros((cout, od, oh, ow))
    for co in range(cout):
        for zo in range(od):
            for yo in range(oh):
                for xo in range(ow):
                    acc = 0.0
                    for ci in range(cin):
                        for dz in range(kd):
                            for dy in range(kh):
                                for dx in range(kw):
                                    acc += (
                                        xp[ci, zo * stride + dz, yo * stride + dy, xo * stride + dx]
                                        * w[co, ci, dz, dy, dx]
                                    )
                    out[co, zo, yo, xo] = acc + (0.0 if bias is None else bias[co])
    return out


def transposed_conv3d_naive(x, w, bias=None, stride=1, padding=0):
    """Scatter form of the transposed convolution; weight layout (Cin, Cout, k, k, k)."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    cin, d, h, ww = x.shape
    cin2, cout, kd, kh, kw = w.shape
    assert cin == cin2
    fd = (d - 1) * stride + kd
    fh = (h - 1) * stride + kh
    fw = (ww - 1) * stride + kw
    full = np.zeros((cout, fd, fh, fw))
    for ci in range(cin):
        for zi in range(d):
            for yi in range(h):
                for xi in range(ww):
                    v = x[ci, zi, yi, xi]
                    if v == 0.0:
                        continue
                    full[:, zi * stride : zi * stride + kd, yi * stride : yi * stride + kh,
                         xi * stride : xi * stride + kw] += v * w[ci]
    out = full[:, padding : fd - padding, padding : fh - padding, padding : fw - padding]
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)[:, None, None, None]
    return out


def dilate_bruteforce(mask: np.ndarray) -> np.ndarray:
    """One 26-neighborhood dilation; outside the grid counts as background."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros_like(mask)
    nx, ny, nz = mask.shape
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                hit = False
                for dx in (-1, 0, 1):
                    for dy in (-1, 0, 1):
                        for dz in (-1, 0, 1):
                            px, py, pz = x + dx, y + dy, z + dz
                            if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz and mask[px, py, pz]:
                                hit = True
                out[x, y, z] = hit
    return out


def erode_bruteforce(mask: np.ndarray) -> np.ndarray:
    """One 26-neighborhood erosion; outside the grid counts as background."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros_like(mask)
    nx, ny, nz = mask.shape
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                keep = True
                for dx in (-1, 0, 1):
                    for dy in (-1, 0, 1):
                        for dz in (-1, 0, 1):
                            px, py, pz = x + dx, y + dy, z + dz
                            inside = 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz
                            if not inside or not mask[px, py, pz]:
                                keep = False
                out[x, y, z] = keep
    return out


def closing_bruteforce(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Closing on an unbounded grid, emulated by padding before dilating."""
    padded = np.pad(np.asarray(mask, dtype=bool), radius)
    for _ in range(radius):
        padded = dilate_bruteforce(padded)
    for _ in range(radius):
        padded = erode_bruteforce(padded)
    crop = tuple(slice(radius, radius + d) for d in mask.shape)
    return padded[crop]


def midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties shared."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and values[order[j]] == values[order[i]]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)
        i = j
    return ranks


def wilcoxon_enumeration_p(diffs) -> float:
    """Two-sided exact p by enumerating all 2^n sign assignments."""
    diffs = np.asarray([d for d in diffs if d != 0], dtype=np.float64)
    n = len(diffs)
    ranks = midranks(np.abs(diffs))
    w_obs = ranks[diffs > 0].sum()
    mu = ranks.sum() / 2.0
    patterns = np.arange(1 << n, dtype=np.uint64)
    signs = (patterns[:, None] >> np.arange(n, dtype=np.uint64)) & 1
    w_all = signs @ ranks
    # ranks are multiples of 0.5 and mu of 0.25, so the comparison is exact
    hits = int((np.abs(w_all - mu) >= abs(w_obs - mu)).sum())
    return hits / (1 << n)


def bh_stepup(pvals) -> list[float]:
    """adjusted_i = min over j >= rank(i) of p_(j) * m / j, clamped to 1."""
    p = list(pvals)
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    for pos, idx in enumerate(order, start=1):
        candidates = [
            p[order[j - 1]] * m / j for j in range(pos, m + 1)
        ]
        adjusted[idx] = min(1.0, min(candidates))
    return adjusted


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Sampled, truncated-at-3-sigma, unit-mass kernel (matches the blur contract)."""
    radius = int(3.0 * sigma + 0.5)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def percentile_linear(values, q: float) -> float:
    """Linear-interpolation order statistic, from first principles."""
    v = sorted(values)
    pos = (len(v) - 1) * q / 100.0
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    if lo == hi:
        return float(v[lo])
    frac = pos - lo
    return float(v[lo] * (1 - frac) + v[hi] * frac)
