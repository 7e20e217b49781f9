"""Refacing inference: defaced volume in, composited refaced volume out.

Pipeline: winsorize -> fit/apply [-1, 1] scaling -> pad/tile -> generator per
tile with dropout ON (the privacy noise) -> recombine with overlap averaging
-> invert scaling -> composite through the face/air mask. Deterministic for a
fixed seed; brain voxels outside the mask are returned bit-identical.
"""

from __future__ import annotations

import time

import numpy as np
import torch

from ..nifti import NiftiImage
from ..volume import (
    apply_scale,
    composite_reface,
    fit_scale,
    invert_scale,
    pad_to_tile,
    plan_tiles,
    recombine,
    split_tiles,
    winsorize,
)
from .networks import Generator, GeneratorConfig
from .weights import ModelWeights, load_into_module

DEFAULT_CAP = 3000.0


def generator_from_weights(weights: ModelWeights, cfg: GeneratorConfig | None = None) -> Generator:
    """Build a generator from a weights archive (config echo used by default)."""
    if cfg is None:
        stored = weights.metadata.get("generator_config")
        cfg = GeneratorConfig(**stored) if stored else GeneratorConfig()
    generator = Generator(cfg)
    load_into_module(weights, "generator", generator)
    generator.eval()
    return generator


def reface(
    defaced: NiftiImage,
    weights: ModelWeights,
    cfg: GeneratorConfig | None = None,
    dropout_p: float = 0.25,
    seed: int = 0,
    cap: float | None = None,
    tile=(128, 128, 128),
    timing_sink: dict | None = None,
) -> NiftiImage:
    """Replace the face/air region of a defaced ASL volume with generated anatomy."""
    generator = generator_from_weights(weights, cfg)
    if cap is None:
        cap = float(weights.metadata.get("winsorize_cap", DEFAULT_CAP))

    def stage(name: str, started: float) -> float:
        now = time.perf_counter()
        if timing_sink is not None:
            timing_sink[name] = now - started
        return now

    t = time.perf_counter()
    capped = winsorize(defaced, cap)
    t = stage("winsorize", t)
    coeffs = fit_scale(capped)
    scaled = apply_scale(capped, coeffs)
    t = stage("scale", t)
    padded, crop = pad_to_tile(scaled.data, tile)
    plan = plan_tiles(padded.shape, tile)
    tiles = split_tiles(padded, plan)
    t = stage("tile", t)

    rng = torch.Generator().manual_seed(seed)
    out_tiles = []
    with torch.no_grad():
        for tile_arr in tiles:
            inp = torch.from_numpy(tile_arr).float().reshape(1, 1, *tile_arr.shape)
            out = generator(inp, rng=rng, dropout_p=dropout_p)
            out_tiles.append(out.reshape(*tile_arr.shape).numpy())
    t = stage("generate", t)

    merged = recombine(out_tiles, plan)[crop]
    t = stage("recombine", t)
    generated = invert_scale(scaled.with_data(merged), coeffs)
    result = composite_reface(defaced, generated)
    stage("composite", t)
    return result
