"""Residual anomaly scores, heat-map rendering and perceptual distance."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from morphaeus.utils import to_numpy, to_tensor

SCORE_MODES = ("mean-abs", "max-abs", "p95-abs")


def anomaly_score(x, recon, mode: str = "mean-abs"):
    """Per-image aggregate of the absolute residual.

    A rank-4 input yields one score per image; lower ranks are treated as
    a single image and yield a float. Higher scores mean more anomalous.
    """
    if mode not in SCORE_MODES:
        raise ValueError(f"unknown score mode {mode!r}; choose one of {SCORE_MODES}")
    a = np.asarray(to_numpy(x), dtype=np.float64)
    b = np.asarray(to_numpy(recon), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: input {a.shape} vs reconstruction {b.shape}")
    single = a.ndim < 4
    flat = np.abs(a - b).reshape(1 if single else a.shape[0], -1)
    if mode == "mean-abs":
        scores = flat.mean(axis=1)
    elif mode == "max-abs":
        scores = flat.max(axis=1)
    else:
        scores = np.percentile(flat, 95, axis=1)
    return float(scores[0]) if single else scores


def _as_image(arr) -> np.ndarray:
    a = np.asarray(to_numpy(arr), dtype=np.float64)
    a = np.squeeze(a)
    if a.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {a.shape}")
    return a


def residual_heatmap(x, recon, path: str | Path | None = None) -> np.ndarray:
    """Render |x - recon| over the input with a color map.

    The residual is normalized to [0, 1] per image and used both as color
    (via the map) and as overlay opacity, so regions with no residual show
    the plain input. Returns an (H, W, 3) uint8 array; writes a PNG when
    ``path`` is given.
    """
    from matplotlib import colormaps

    base = _as_image(x)
    other = _as_image(recon)
    if base.shape != other.shape:
        raise ValueError(f"shape mismatch: input {base.shape} vs reconstruction {other.shape}")
    residual = np.abs(base - other)
    peak = residual.max()
    heat = residual / peak if peak > 0 else np.zeros_like(residual)
    colored = colormaps["jet"](heat)[..., :3]
    gray = np.repeat(np.clip(base, 0.0, 1.0)[..., None], 3, axis=2)
    blended = (1.0 - heat[..., None]) * gray + heat[..., None] * colored
    img = (np.clip(blended, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(img).save(path)
    return img


def perceptual_distance(x, y, extractor) -> float:
    """Feature-space distance with unit-normalized channel vectors.

    Each tap's features are normalized per spatial position before the
    squared difference, so the distance reflects pattern mismatch rather
    than activation magnitude. Zero iff the tap features match.
    """
    a = to_tensor(x)
    b = to_tensor(y)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    with torch.no_grad():
        taps_a = extractor.features(a)
        taps_b = extractor.features(b)
    total = 0.0
    for ta, tb in zip(taps_a, taps_b):
        na = ta / (ta.norm(dim=1, keepdim=True) + 1e-10)
        nb = tb / (tb.norm(dim=1, keepdim=True) + 1e-10)
        total += float(((na - nb) ** 2).mean())
    return total / len(taps_a)
