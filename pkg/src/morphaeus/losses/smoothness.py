"""Displacement-field regularizers."""

from __future__ import annotations

import torch


def smoothness(field: torch.Tensor, kind: str = "gradient") -> torch.Tensor:
    """Regularity penalty for a dense displacement field.

    ``kind="gradient"`` (default) is a diffusion regularizer: forward
    differences of every field component along x and y are squared and
    averaged over their support, then the direction/component means are
    summed. A spatially constant field scores exactly 0; a unit-slope ramp
    in one component scores the squared slope.

    ``kind="magnitude"`` is the mean squared displacement itself, which
    penalizes any deviation from the identity rather than non-smoothness.
    """
    if field.ndim != 4:
        raise ValueError("smoothness expects a rank-4 (N, 2, H, W) field")
    if kind == "magnitude":
        return (field * field).mean()
    if kind != "gradient":
        raise ValueError(f"unknown smoothness kind {kind!r}; use 'gradient' or 'magnitude'")
    dx = field[:, :, :, 1:] - field[:, :, :, :-1]
    dy = field[:, :, 1:, :] - field[:, :, :-1, :]
    # Per-direction mean over positions, summed over components and
    # directions: a ramp of slope c in one component yields c^2.
    term_x = (dx * dx).sum(dim=1).mean()
    term_y = (dy * dy).sum(dim=1).mean()
    return term_x + term_y
