"""Desk-scale training loop: alternating D/G updates over sub-volume pairs.

One iteration = one (defaced, original) tile pair: a discriminator step on
(real, fake.detach()) followed by a generator step. Both optimizers follow
the restarting cosine schedule. Everything stochastic (weight init, pair
order, dropout) is driven by generators derived from the schedule seed, so
two runs with the same seed produce bit-identical weights.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass

import numpy as np
import torch

from ..errors import EmptyInput
from ..nifti import NiftiImage
from ..volume import compute_cap, fit_scale, pad_to_tile, plan_tiles, split_tiles, winsorize, apply_scale
from .losses import TrainSchedule, adversarial_losses, cosine_lr
from .networks import Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, init_weights
from .weights import ModelWeights, from_modules


@dataclass
class TrainResult:
    checkpoints: list[tuple[int, ModelWeights]]  # (epoch, snapshot); final epoch repeated as -1
    loss_rows: list[dict]
    final: ModelWeights


def prepare_tile_pairs(
    pairs: list[tuple[NiftiImage, NiftiImage]],
    tile=(128, 128, 128),
    cap: float | None = None,
) -> tuple[list[tuple[np.ndarray, np.ndarray]], float]:
    """Winsorize, scale to [-1, 1] and tile (defaced, original) volume pairs.

    The cap defaults to the 80th percentile of the original scans' maxima;
    scale coefficients come from each winsorized original and are applied to
    both volumes of the pair.
    """
    if not pairs:
        raise EmptyInput("no training pairs")
    if cap is None:
        cap = compute_cap([float(orig.data.max()) for _, orig in pairs], 80.0)
    tiles = []
    for defaced, original in pairs:
        d = winsorize(defaced, cap)
        o = winsorize(original, cap)
        coeffs = fit_scale(o)
        d = apply_scale(d, coeffs)
        o = apply_scale(o, coeffs)
        d_arr, _ = pad_to_tile(d.data, tile)
        o_arr, _ = pad_to_tile(o.data, tile)
        plan = plan_tiles(d_arr.shape, tile)
        tiles.extend(zip(split_tiles(d_arr, plan), split_tiles(o_arr, plan)))
    return tiles, cap


def train(
    tile_pairs: list[tuple[np.ndarray, np.ndarray]],
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    schedule: TrainSchedule,
    metadata: dict | None = None,
) -> TrainResult:
    """Train on pre-processed (defaced_tile, original_tile) pairs.

    Emits a weights snapshot every `schedule.validate_every` epochs plus the
    final state, and a per-iteration loss log with the exact lambda-weighted
    decomposition (loss_G = loss_G_adv + lam * l15, accumulated in float64).
    """
    if not tile_pairs:
        raise EmptyInput("no tile pairs")

    init_rng = torch.Generator().manual_seed(schedule.seed)
    generator = Generator(gen_cfg)
    discriminator = Discriminator(disc_cfg)
    init_weights(generator, init_rng)
    init_weights(discriminator, init_rng)
    dropout_rng = torch.Generator().manual_seed(schedule.seed + 1)
    order_rng = random.Random(schedule.seed + 2)

    opt_g = torch.optim.Adam(generator.parameters(), lr=schedule.base_lr, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=schedule.base_lr, betas=(0.5, 0.999))

    tensors = [
        (
            torch.from_numpy(np.ascontiguousarray(d)).float().reshape(1, 1, *d.shape),
            torch.from_numpy(np.ascontiguousarray(o)).float().reshape(1, 1, *o.shape),
        )
        for d, o in tile_pairs
    ]

    meta = dict(metadata or {})
    meta.update(
        {
            "generator_config": asdict(gen_cfg),
            "discriminator_config": asdict(disc_cfg),
            "schedule": asdict(schedule),
            "seed": schedule.seed,
        }
    )

    def snapshot(epoch: int, step: int) -> ModelWeights:
        m = dict(meta)
        m.update({"epoch": epoch, "step": step})
        return from_modules(m, generator=generator, discriminator=discriminator)

    checkpoints: list[tuple[int, ModelWeights]] = []
    loss_rows: list[dict] = []
    step = 0
    for epoch in range(1, schedule.epochs + 1):
        order = list(range(len(tensors)))
        order_rng.shuffle(order)
        for idx in order:
            y, x = tensors[idx]
            lr = cosine_lr(step, schedule)
            for group in opt_g.param_groups:
                group["lr"] = lr
            for group in opt_d.param_groups:
                group["lr"] = lr

            g = generator(y, rng=dropout_rng)

            opt_d.zero_grad(set_to_none=True)
            d_losses = adversarial_losses(
                discriminator(x, y), discriminator(g.detach(), y), x, g.detach(), schedule.lam
            )
            d_losses["loss_D"].backward()
            opt_d.step()

            opt_g.zero_grad(set_to_none=True)
            g_losses = adversarial_losses(
                discriminator(x, y).detach(), discriminator(g, y), x, g, schedule.lam
            )
            g_losses["loss_G"].backward()
            opt_g.step()

            adv = g_losses["loss_G_adv"].item()
            l15 = g_losses["l15"].item()
            loss_rows.append(
                {
                    "step": step,
                    "epoch": epoch,
                    "loss_D": d_losses["loss_D"].item(),
                    "loss_G": adv + schedule.lam * l15,
                    "loss_G_adv": adv,
                    "l15": l15,
                    "lr": lr,
                }
            )
            step += 1
        if epoch % schedule.validate_every == 0:
            checkpoints.append((epoch, snapshot(epoch, step)))

    final = snapshot(schedule.epochs, step)
    return TrainResult(checkpoints=checkpoints, loss_rows=loss_rows, final=final)
