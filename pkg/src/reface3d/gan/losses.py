"""Adversarial objective with the 1.5-power residual term, and the LR schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from ..errors import NumericalError, ShapeMismatch

PROB_EPS = 1e-7


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 50
    validate_every: int = 7
    base_lr: float = 0.0002
    cosine_decay_period: int = 1000
    lam: float = 0.015
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.validate_every, self.cosine_decay_period) < 1:
            raise ValueError("epochs, validate_every and cosine_decay_period must be >= 1")
        if self.base_lr <= 0 or self.lam <= 0:
            raise ValueError("base_lr and lam must be positive")


def l15_term(x: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
    """Mean over voxels of |x - g|^1.5 (between L1 and L2 behaviour)."""
    if x.shape != g.shape:
        raise ShapeMismatch(f"x {tuple(x.shape)} != g {tuple(g.shape)}")
    return (x - g).abs().pow(1.5).mean()


def adversarial_losses(
    d_real: torch.Tensor,
    d_fake: torch.Tensor,
    x: torch.Tensor,
    g: torch.Tensor,
    lam: float,
) -> dict[str, torch.Tensor]:
    """Discriminator and (non-saturating) generator losses.

    loss_D = -E[log D(x,y)] - E[log(1 - D(G,y))]
    loss_G = -E[log D(G,y)] + lam * mean|x - G|^1.5

    Patch probabilities are clamped away from {0, 1} before the logs. The
    generator term uses -log D(fake) rather than log(1 - D(fake)); the
    gradient directions match the minimax objective but do not vanish when
    the discriminator wins early.
    """
    if not (torch.isfinite(d_real).all() and torch.isfinite(d_fake).all()):
        raise NumericalError("non-finite discriminator outputs")
    d_real = d_real.clamp(PROB_EPS, 1.0 - PROB_EPS)
    d_fake = d_fake.clamp(PROB_EPS, 1.0 - PROB_EPS)
    loss_d = -(d_real.log().mean()) - (1.0 - d_fake).log().mean()
    adv_g = -(d_fake.log().mean())
    l15 = l15_term(x, g)
    loss_g = adv_g + lam * l15
    if not (torch.isfinite(loss_d) and torch.isfinite(loss_g)):
        raise NumericalError("non-finite loss")
    return {"loss_D": loss_d, "loss_G": loss_g, "loss_G_adv": adv_g, "l15": l15}


def cosine_lr(step: int, schedule: TrainSchedule) -> float:
    """Cosine decay restarting every `cosine_decay_period` iterations."""
    if step < 0:
        raise ValueError("step must be >= 0")
    period = schedule.cosine_decay_period
    phase = (step % period) / period
    return schedule.base_lr * 0.5 * (1.0 + math.cos(math.pi * phase))
