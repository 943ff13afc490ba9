"""Local normalized cross-correlation over sliding windows."""

from __future__ import annotations

import torch
import torch.nn.functional as F


def lncc(a: torch.Tensor, b: torch.Tensor, window: int = 9, eps: float = 1e-5) -> torch.Tensor:
    """Mean windowed normalized cross-correlation between two batches.

    Statistics are computed over every fully-contained ``window`` x ``window``
    patch (no padding) and averaged over patches, channels and batch. The
    denominator variances are clamped from below by ``eps`` so that constant
    windows contribute 0 instead of dividing by zero; by Cauchy-Schwarz the
    result stays in [-1, 1].

    Invariant under positive affine intensity maps of either argument.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.ndim != 4:
        raise ValueError("lncc expects rank-4 (N, C, H, W) inputs")
    if window % 2 != 1 or window < 1:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    h, w = a.shape[2:]
    if window > h or window > w:
        raise ValueError(f"window {window} larger than image {h}x{w}")

    # Centering each image first leaves every windowed statistic unchanged
    # but avoids the catastrophic cancellation of E[xy] - E[x]E[y] on
    # low-contrast (e.g. constant) inputs in float32.
    a = a - a.mean(dim=(2, 3), keepdim=True)
    b = b - b.mean(dim=(2, 3), keepdim=True)

    c = a.shape[1]
    kernel = a.new_ones((c, 1, window, window)) / float(window * window)

    def box(x: torch.Tensor) -> torch.Tensor:
        return F.conv2d(x, kernel, groups=c)

    mean_a = box(a)
    mean_b = box(b)
    var_a = box(a * a) - mean_a * mean_a
    var_b = box(b * b) - mean_b * mean_b
    cov = box(a * b) - mean_a * mean_b
    denom = torch.sqrt(var_a.clamp_min(eps) * var_b.clamp_min(eps))
    return (cov / denom).mean()
