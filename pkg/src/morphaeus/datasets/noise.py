"""Coarse noise corruption for denoising-style training."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from morphaeus.utils import derive_seed

KINDS = ("coarse-gaussian",)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise drawn on a coarse grid and bilinearly upsampled.

    ``coarseness`` is the downsampling factor of the grid the noise is
    drawn on; 1 gives ordinary per-pixel gaussian noise. ``magnitude`` is
    the per-pixel standard deviation of the additive field before
    clipping.
    """

    kind: str = "coarse-gaussian"
    magnitude: float = 0.2
    coarseness: int = 8


def corrupt(batch: np.ndarray, spec: NoiseSpec, seed: int) -> np.ndarray:
    """Add clipped coarse gaussian noise to a batch in [0, 1].

    The upsampled field is standardized per sample (zero mean, unit
    standard deviation over its pixels) before scaling by the magnitude,
    so the additive noise has per-pixel deviation equal to
    ``spec.magnitude`` regardless of the coarseness factor.
    """
    if spec.kind not in KINDS:
        raise ValueError(f"unknown noise kind {spec.kind!r}; expected one of {KINDS}")
    if spec.magnitude < 0:
        raise ValueError(f"noise magnitude must be nonnegative, got {spec.magnitude}")
    if spec.coarseness < 1:
        raise ValueError(f"coarseness must be a positive integer, got {spec.coarseness}")
    batch = np.asarray(batch, dtype=np.float32)
    if batch.ndim != 4:
        raise ValueError("corrupt expects a rank-4 (N, C, H, W) batch")
    if batch.size and (batch.min() < -1e-6 or batch.max() > 1 + 1e-6):
        raise ValueError("corrupt expects intensities in [0, 1]")
    if spec.magnitude == 0 or batch.size == 0:
        return batch.copy()

    n, c, h, w = batch.shape
    hc = max(1, math.ceil(h / spec.coarseness))
    wc = max(1, math.ceil(w / spec.coarseness))
    rng = np.random.default_rng(derive_seed(seed, "noise"))
    coarse = rng.standard_normal((n, c, hc, wc)).astype(np.float32)
    field = F.interpolate(
        torch.from_numpy(coarse), size=(h, w), mode="bilinear", align_corners=False
    ).numpy()
    if hc * wc > 1:
        # Upsampling shrinks the deviation; restore exactly unit std per
        # sample. A 1x1 grid is already N(0,1) across samples and has no
        # within-sample spread to normalize.
        mean = field.mean(axis=(2, 3), keepdims=True)
        std = field.std(axis=(2, 3), keepdims=True)
        field = (field - mean) / np.maximum(std, 1e-8)
    return np.clip(batch + spec.magnitude * field, 0.0, 1.0)
