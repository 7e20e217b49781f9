"""Functional 3D tensor ops on unbatched (C, D, H, W) tensors.

Thin wrappers around torch kernels with the batch axis handled internally;
dropout takes an explicit torch.Generator so every stochastic path in the
package is a pure function of (inputs, seed).
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..errors import ShapeMismatch


def _check_4d(x: torch.Tensor, name: str) -> None:
    if x.dim() != 4:
        raise ShapeMismatch(f"{name} must be (C, D, H, W), got {tuple(x.shape)}")


def conv3d(x: torch.Tensor, weight: torch.Tensor, bias=None, stride=1, padding=0) -> torch.Tensor:
    """Cross-correlation; output spatial dim = floor((in + 2p - k)/s) + 1."""
    _check_4d(x, "input")
    if weight.dim() != 5 or weight.shape[1] != x.shape[0]:
        raise ShapeMismatch(
            f"weight {tuple(weight.shape)} incompatible with input {tuple(x.shape)}"
        )
    return F.conv3d(x.unsqueeze(0), weight, bias, stride=stride, padding=padding).squeeze(0)


def transposed_conv3d(
    x: torch.Tensor, weight: torch.Tensor, bias=None, stride=1, padding=0
) -> torch.Tensor:
    """Transposed conv; output spatial dim = (in - 1)*s - 2p + k."""
    _check_4d(x, "input")
    if weight.dim() != 5 or weight.shape[0] != x.shape[0]:
        raise ShapeMismatch(
            f"weight {tuple(weight.shape)} incompatible with input {tuple(x.shape)}"
        )
    return F.conv_transpose3d(
        x.unsqueeze(0), weight, bias, stride=stride, padding=padding
    ).squeeze(0)


def instance_norm(x: torch.Tensor, weight=None, bias=None, eps: float = 1e-5) -> torch.Tensor:
    """Per-channel normalization over the spatial axes of one sample."""
    _check_4d(x, "input")
    return F.instance_norm(x.unsqueeze(0), weight=weight, bias=bias, eps=eps).squeeze(0)


def leaky_relu(x: torch.Tensor, slope: float = 0.2) -> torch.Tensor:
    return F.leaky_relu(x, negative_slope=slope)


def relu(x: torch.Tensor) -> torch.Tensor:
    return F.relu(x)


def tanh(x: torch.Tensor) -> torch.Tensor:
    return torch.tanh(x)


def sigmoid(x: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(x)


def dropout(x: torch.Tensor, p: float, rng: torch.Generator | None) -> torch.Tensor:
    """Inverted dropout driven by an explicit generator.

    rng=None disables dropout entirely (deterministic inference without
    noise); otherwise kept activations are rescaled by 1/(1-p) so the
    expectation is unchanged.
    """
    if rng is None or p <= 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must be in [0, 1)")
    keep = 1.0 - p
    mask = (torch.rand(x.shape, generator=rng, dtype=x.dtype, device=x.device) < keep).to(x.dtype)
    return x * mask / keep
