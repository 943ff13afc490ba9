"""Windowed structural similarity for images in [0, 1]."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from morphaeus.utils import to_tensor


def _gaussian_kernel(window: int, sigma: float, channels: int, dtype) -> torch.Tensor:
    coords = torch.arange(window, dtype=dtype) - (window - 1) / 2
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    g = g / g.sum()
    k = torch.outer(g, g)
    return k.expand(channels, 1, window, window).contiguous()


def ssim(a, b, window: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM over all fully-interior windows, computed in float64.

    Uses a Gaussian window and the standard stabilizers for a unit dynamic
    range. Symmetric; 1.0 exactly when the images match.
    """
    x = to_tensor(a, torch.float64)
    y = to_tensor(b, torch.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    n, c, h, w = x.shape
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and at least 3, got {window}")
    if min(h, w) < window:
        raise ValueError(f"window {window} does not fit into a {h}x{w} image")
    kern = _gaussian_kernel(window, sigma, c, x.dtype)
    mu_x = F.conv2d(x, kern, groups=c)
    mu_y = F.conv2d(y, kern, groups=c)
    var_x = F.conv2d(x * x, kern, groups=c) - mu_x * mu_x
    var_y = F.conv2d(y * y, kern, groups=c) - mu_y * mu_y
    cov = F.conv2d(x * y, kern, groups=c) - mu_x * mu_y
    c1 = k1 * k1
    c2 = k2 * k2
    score = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(score.mean())
