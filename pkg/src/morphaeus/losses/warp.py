"""Differentiable dense warping of image batches (spatial transformer)."""

from __future__ import annotations

import torch
import torch.nn.functional as F


def _base_grid(height: int, width: int, dtype: torch.dtype, device: torch.device) -> torch.Tensor:
    ys = torch.arange(height, dtype=dtype, device=device)
    xs = torch.arange(width, dtype=dtype, device=device)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    return gx, gy


def warp(image: torch.Tensor, field: torch.Tensor) -> torch.Tensor:
    """Resample ``image`` at positions displaced by ``field``.

    ``field`` holds per-pixel displacements in pixel units, channel 0 along
    x (columns), channel 1 along y (rows). The output at pixel p is the
    bilinear sample of ``image`` at p + field(p); sampling positions outside
    the image are clamped to the border. Differentiable in both arguments.

    Args:
        image: (N, C, H, W) batch.
        field: (N, 2, H, W) displacement map, same spatial size as ``image``.
    """
    if image.ndim != 4 or field.ndim != 4:
        raise ValueError("warp expects rank-4 image and field tensors")
    if field.shape[1] != 2:
        raise ValueError(f"field must have 2 channels (dx, dy), got {field.shape[1]}")
    if image.shape[0] != field.shape[0] or image.shape[2:] != field.shape[2:]:
        raise ValueError(
            f"image {tuple(image.shape)} and field {tuple(field.shape)} are not aligned"
        )
    n, _, h, w = image.shape
    gx, gy = _base_grid(h, w, field.dtype, field.device)
    sx = gx[None] + field[:, 0]
    sy = gy[None] + field[:, 1]
    # grid_sample wants coordinates normalized to [-1, 1] with the corner
    # convention matching pixel centers (align_corners=True).
    if w > 1:
        sx = 2.0 * sx / (w - 1) - 1.0
    else:
        sx = torch.zeros_like(sx)
    if h > 1:
        sy = 2.0 * sy / (h - 1) - 1.0
    else:
        sy = torch.zeros_like(sy)
    grid = torch.stack([sx, sy], dim=-1)
    return F.grid_sample(image, grid, mode="bilinear", padding_mode="border", align_corners=True)
