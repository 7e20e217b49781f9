"""Intensity scaling, sub-volume tiling and the mask compositing around the generator.

All operations are pure: they take and return NiftiImage / numpy arrays and
never mutate their inputs. Masks are plain boolean arrays with the same shape
as the volume they annotate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateRange, EmptyInput, ShapeMismatch, VolumeTooLarge
from .nifti import NiftiImage

DEFAULT_TILE = (128, 128, 128)
AIR_LEVEL = 3.0  # raw-intensity ceiling below which refaced voxels count as air

_CUBE = np.ones((3, 3, 3), dtype=bool)  # 26-connected unit structuring element


@dataclass(frozen=True)
class ScaleCoeffs:
    """Linear map scaled = a * raw + b taking [source_min, source_max] to [-1, 1]."""

    a: float
    b: float
    source_min: float
    source_max: float


@dataclass(frozen=True)
class TilePlan:
    """Corner-anchored cover of a volume by equal tiles (at most 2 origins per axis)."""

    tile_shape: tuple[int, int, int]
    origins: tuple[tuple[int, int, int], ...]
    volume_dims: tuple[int, int, int]


def winsorize(img: NiftiImage, cap: float) -> NiftiImage:
    """Clamp every voxel to at most `cap`."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    return img.with_data(np.minimum(img.data, np.float32(cap)))


def compute_cap(per_scan_maxima, percentile: float = 80.0) -> float:
    """Percentile (linear interpolation) of the per-scan maximum intensities."""
    maxima = np.asarray(list(per_scan_maxima), dtype=np.float64)
    if maxima.size == 0:
        raise EmptyInput("no scan maxima given")
    if not 0.0 < percentile < 100.0:
        raise ValueError("percentile must be in (0, 100)")
    return float(np.percentile(maxima, percentile))


def fit_scale(img: NiftiImage) -> ScaleCoeffs:
    """Coefficients mapping the observed intensity range to [-1, 1]."""
    lo = float(img.data.min())
    hi = float(img.data.max())
    if hi <= lo:
        raise DegenerateRange("constant volume has no intensity range")
    a = 2.0 / (hi - lo)
    return ScaleCoeffs(a=a, b=-1.0 - a * lo, source_min=lo, source_max=hi)


def apply_scale(img: NiftiImage, coeffs: ScaleCoeffs) -> NiftiImage:
    return img.with_data(img.data * np.float32(coeffs.a) + np.float32(coeffs.b))


def invert_scale(img: NiftiImage, coeffs: ScaleCoeffs) -> NiftiImage:
    return img.with_data((img.data - np.float32(coeffs.b)) / np.float32(coeffs.a))


def plan_tiles(dims, tile=DEFAULT_TILE) -> TilePlan:
    """Plan tile origins covering `dims`: one origin where the tile fits exactly,
    otherwise the two corner-anchored origins 0 and dims-tile."""
    dims = tuple(int(d) for d in dims)
    tile = tuple(int(t) for t in tile)
    per_axis = []
    for d, t in zip(dims, tile):
        if d < t:
            raise ShapeMismatch(f"volume axis {d} smaller than tile {t}; pad first")
        if d > 2 * t:
            raise VolumeTooLarge(f"axis of {d} voxels cannot be covered by two {t}-tiles")
        per_axis.append((0,) if d == t else (0, d - t))
    origins = tuple(itertools.product(*per_axis))
    return TilePlan(tile_shape=tile, origins=origins, volume_dims=dims)


def split_tiles(volume: np.ndarray, plan: TilePlan) -> list[np.ndarray]:
    if volume.shape != plan.volume_dims:
        raise ShapeMismatch(f"volume {volume.shape} != plan dims {plan.volume_dims}")
    tx, ty, tz = plan.tile_shape
    return [volume[x : x + tx, y : y + ty, z : z + tz].copy() for x, y, z in plan.origins]


def recombine(tiles, plan: TilePlan) -> np.ndarray:
    """Average the tiles back into a full volume; overlaps are arithmetic means.

    Coverage counts are powers of two, so recombining an untouched split is
    bit-identical to the original volume.
    """
    tiles = list(tiles)
    if len(tiles) != len(plan.origins):
        raise ShapeMismatch(f"{len(tiles)} tiles for {len(plan.origins)} origins")
    tx, ty, tz = plan.tile_shape
    acc = np.zeros(plan.volume_dims, dtype=np.float64)
    count = np.zeros(plan.volume_dims, dtype=np.int32)
    for tile, (x, y, z) in zip(tiles, plan.origins):
        tile = np.asarray(tile)
        if tile.shape != plan.tile_shape:
            raise ShapeMismatch(f"tile {tile.shape} != plan tile {plan.tile_shape}")
        acc[x : x + tx, y : y + ty, z : z + tz] += tile
        count[x : x + tx, y : y + ty, z : z + tz] += 1
    assert count.min() >= 1, "tile plan left voxels uncovered"
    return (acc / count).astype(np.float32)


def coverage_counts(plan: TilePlan) -> np.ndarray:
    """How many tiles cover each voxel (for coverage audits)."""
    tx, ty, tz = plan.tile_shape
    count = np.zeros(plan.volume_dims, dtype=np.int32)
    for x, y, z in plan.origins:
        count[x : x + tx, y : y + ty, z : z + tz] += 1
    return count


def pad_to_tile(volume: np.ndarray, tile=DEFAULT_TILE):
    """Zero-pad axes smaller than the tile (split as evenly as possible).

    Returns the padded array and the slices that crop it back.
    """
    pads, crops = [], []
    for d, t in zip(volume.shape, tile):
        short = max(0, t - d)
        before = short // 2
        pads.append((before, short - before))
        crops.append(slice(before, before + d))
    if not any(b or a for b, a in pads):
        return volume, tuple(crops)
    return np.pad(volume, pads, mode="constant"), tuple(crops)


def closing_3d(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Morphological closing by the 3x3x3 cube applied `radius` times.

    The volume is padded before dilating so border voxels behave as in an
    unbounded grid; closing is therefore extensive (output contains input)
    and idempotent.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return mask.copy()
    padded = np.pad(mask, radius, mode="constant", constant_values=False)
    dilated = ndimage.binary_dilation(padded, structure=_CUBE, iterations=radius)
    closed = ndimage.binary_erosion(dilated, structure=_CUBE, iterations=radius, border_value=0)
    crop = tuple(slice(radius, radius + d) for d in mask.shape)
    return closed[crop]


def face_air_mask(defaced: NiftiImage, radius: int = 1) -> np.ndarray:
    """Face-and-air mask: the closed zero-value set of a defaced volume."""
    return closing_3d(defaced.data == 0, radius=radius)


def composite_reface(defaced: NiftiImage, generated: NiftiImage) -> NiftiImage:
    """Paste generated voxels into the face/air mask and silence residual air.

    Voxels outside the face/air mask are taken from the defaced input
    bit-for-bit, so brain tissue is guaranteed untouched. Within the mask,
    generated voxels below AIR_LEVEL (after a closing) are zeroed so the
    generator's noise does not survive in air.
    """
    if defaced.dims != generated.dims:
        raise ShapeMismatch(f"defaced {defaced.dims} != generated {generated.dims}")
    mask = face_air_mask(defaced)
    out = np.where(mask, generated.data, defaced.data).astype(np.float32)
    air = closing_3d(out < AIR_LEVEL) & mask
    out[air] = 0.0
    return defaced.with_data(out)
