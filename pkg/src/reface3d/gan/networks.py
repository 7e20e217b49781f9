"""3D U-net generator with residual bottleneck, and the 3D PatchGAN discriminator.

Both networks operate on batched (N, C, D, H, W) tensors; the dropout noise
source is an explicit torch.Generator passed to forward so identical seeds
give identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ShapeMismatch
from .ops import dropout


@dataclass(frozen=True)
class GeneratorConfig:
    levels: int = 4
    base_channels: int = 32
    bottleneck_res_blocks: int = 4
    dropout_p: float = 0.25
    kernel: int = 4
    norm: str = "instance"

    def __post_init__(self):
        if self.levels < 1 or self.base_channels < 1 or self.bottleneck_res_blocks < 1:
            raise ValueError("levels, base_channels and bottleneck_res_blocks must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")
        if self.norm != "instance":
            raise ValueError(f"unsupported norm {self.norm!r}")

    def channels(self, level: int) -> int:
        return self.base_channels * 2**level


@dataclass(frozen=True)
class DiscriminatorConfig:
    layers: int = 3
    base_channels: int = 32

    def __post_init__(self):
        if self.layers < 1 or self.base_channels < 1:
            raise ValueError("layers and base_channels must be >= 1")

    def channels(self, layer: int) -> int:
        return self.base_channels * 2**layer


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv3d(channels, channels, kernel_size=3, padding=1),
            nn.InstanceNorm3d(channels, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv3d(channels, channels, kernel_size=3, padding=1),
            nn.InstanceNorm3d(channels, affine=True),
        )

    def forward(self, x):
        return x + self.body(x)


def _down_block(in_ch: int, out_ch: int, kernel: int, norm: bool) -> nn.Sequential:
    layers: list[nn.Module] = [nn.Conv3d(in_ch, out_ch, kernel, stride=2, padding=1)]
    if norm:
        layers.append(nn.InstanceNorm3d(out_ch, affine=True))
    layers.append(nn.LeakyReLU(0.2, inplace=True))
    return nn.Sequential(*layers)


def _up_block(in_ch: int, out_ch: int, kernel: int) -> nn.Sequential:
    return nn.Sequential(
        nn.ConvTranspose3d(in_ch, out_ch, kernel, stride=2, padding=1),
        nn.InstanceNorm3d(out_ch, affine=True),
        nn.ReLU(inplace=True),
    )


class Generator(nn.Module):
    """Encoder/decoder with skip concatenation and a residual bottleneck.

    Dropout sits between consecutive bottleneck blocks; it is the only
    stochastic element ("noise z") and activates only when a generator is
    passed to forward.
    """

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        k = cfg.kernel
        self.downs = nn.ModuleList(
            _down_block(
                1 if lvl == 0 else cfg.channels(lvl - 1), cfg.channels(lvl), k, norm=lvl > 0
            )
            for lvl in range(cfg.levels)
        )
        bottom = cfg.channels(cfg.levels - 1)
        self.res_blocks = nn.ModuleList(
            ResidualBlock(bottom) for _ in range(cfg.bottleneck_res_blocks)
        )
        # after each up the skip concatenation doubles the channel count
        ups = []
        ch = bottom
        for lvl in range(cfg.levels - 1, 0, -1):
            ups.append(_up_block(ch, cfg.channels(lvl - 1), k))
            ch = 2 * cfg.channels(lvl - 1)
        self.ups = nn.ModuleList(ups)
        self.head = nn.ConvTranspose3d(ch, 1, k, stride=2, padding=1)

    def forward(
        self,
        y: torch.Tensor,
        rng: torch.Generator | None = None,
        dropout_p: float | None = None,
    ) -> torch.Tensor:
        if y.dim() != 5 or y.shape[1] != 1:
            raise ShapeMismatch(f"expected (N, 1, D, H, W), got {tuple(y.shape)}")
        scale = 2**self.cfg.levels
        if any(s % scale for s in y.shape[2:]):
            raise ShapeMismatch(f"spatial dims {tuple(y.shape[2:])} not divisible by {scale}")
        p = self.cfg.dropout_p if dropout_p is None else dropout_p

        skips = []
        x = y
        for down in self.downs:
            x = down(x)
            skips.append(x)
        for i, block in enumerate(self.res_blocks):
            x = block(x)
            if i < len(self.res_blocks) - 1:
                x = dropout(x, p, rng)
        for up, skip in zip(self.ups, reversed(skips[:-1])):
            x = torch.cat([up(x), skip], dim=1)
        return torch.tanh(self.head(x))


class Discriminator(nn.Module):
    """PatchGAN: stride-2 blocks then a stride-1 projection to per-patch probabilities."""

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        blocks = []
        in_ch = 2  # candidate volume concatenated with its condition
        for layer in range(cfg.layers):
            blocks.append(_down_block(in_ch, cfg.channels(layer), 4, norm=layer > 0))
            in_ch = cfg.channels(layer)
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Conv3d(in_ch, 1, kernel_size=3, stride=1, padding=1)

    def forward(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        if x.shape != y.shape:
            raise ShapeMismatch(f"x {tuple(x.shape)} != y {tuple(y.shape)}")
        return torch.sigmoid(self.head(self.blocks(torch.cat([x, y], dim=1))))


def init_weights(module: nn.Module, rng: torch.Generator) -> None:
    """pix2pix-style init from an explicit generator (N(0, 0.02) convs)."""
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv3d, nn.ConvTranspose3d)):
                m.weight.copy_(
                    torch.empty_like(m.weight).normal_(0.0, 0.02, generator=rng)
                )
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.InstanceNorm3d) and m.affine:
                m.weight.copy_(
                    torch.empty_like(m.weight).normal_(1.0, 0.02, generator=rng)
                )
                m.bias.zero_()


def generator_forward(y, weights, cfg: GeneratorConfig | None = None, rng=None, dropout_p=None):
    """One generator pass on an unbatched (1, D, H, W) tensor from an archive."""
    from .weights import load_into_module

    if cfg is None:
        stored = weights.metadata.get("generator_config")
        cfg = GeneratorConfig(**stored) if stored else GeneratorConfig()
    model = Generator(cfg)
    load_into_module(weights, "generator", model)
    model.eval()
    with torch.no_grad():
        return model(y.unsqueeze(0), rng=rng, dropout_p=dropout_p).squeeze(0)


def discriminator_forward(x, y, weights, cfg: DiscriminatorConfig | None = None):
    """Patch-probability grid for an unbatched (candidate, condition) pair."""
    from .weights import load_into_module

    if cfg is None:
        stored = weights.metadata.get("discriminator_config")
        cfg = DiscriminatorConfig(**stored) if stored else DiscriminatorConfig()
    model = Discriminator(cfg)
    load_into_module(weights, "discriminator", model)
    model.eval()
    with torch.no_grad():
        return model(x.unsqueeze(0), y.unsqueeze(0)).squeeze(0)
