"""Frechet distance between Gaussian summaries of feature embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy import linalg

from morphaeus.errors import ConfigurationError, MorphaeusError
from morphaeus.utils import to_tensor


@dataclass
class FeatureStats:
    """Mean and covariance of pooled features, tagged with their extractor.

    Stats are only comparable when they come from the same extractor; the
    identity hash enforces that at distance time. The covariance is
    symmetrized on construction.
    """

    mean: np.ndarray
    cov: np.ndarray
    count: int
    extractor_hash: str

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (self.mean.size, self.mean.size):
            raise ValueError(
                f"covariance shape {cov.shape} does not match mean size {self.mean.size}"
            )
        self.cov = (cov + cov.T) / 2.0
        if self.count < 2:
            raise ValueError(f"feature statistics need at least 2 samples, got {self.count}")


def feature_stats(images, extractor, batch_size: int = 64) -> FeatureStats:
    """Gaussian summary of pooled embeddings for an image batch."""
    x = to_tensor(images)
    if len(x) < 2:
        raise ValueError(f"feature statistics need at least 2 samples, got {len(x)}")
    chunks = []
    with torch.no_grad():
        for lo in range(0, len(x), batch_size):
            chunks.append(extractor.pooled(x[lo : lo + batch_size]).double().numpy())
    feats = np.concatenate(chunks)
    return FeatureStats(
        mean=feats.mean(axis=0),
        cov=np.cov(feats, rowvar=False),
        count=len(feats),
        extractor_hash=extractor.identity_hash,
    )


def frechet_distance(a: FeatureStats, b: FeatureStats, eps: float = 1e-6) -> float:
    """Squared Frechet distance between two Gaussian feature summaries.

    ``d2 = |mu_a - mu_b|^2 + tr(cov_a + cov_b - 2 (cov_a cov_b)^(1/2))``.
    A small diagonal offset stabilizes the matrix square root when the
    plain product is too ill-conditioned; tiny negative results from
    rounding are clamped to zero.
    """
    if a.extractor_hash != b.extractor_hash:
        raise ConfigurationError(
            "feature statistics come from different extractors "
            f"({a.extractor_hash} vs {b.extractor_hash}) and are not comparable"
        )
    mu_d = a.mean - b.mean
    with np.errstate(invalid="ignore"):  # sqrtm's error estimate divides by |A|
        covmean, _ = linalg.sqrtm(a.cov @ b.cov, disp=False)
        if not np.isfinite(covmean).all():
            offset = np.eye(a.cov.shape[0]) * eps
            covmean, _ = linalg.sqrtm((a.cov + offset) @ (b.cov + offset), disp=False)
    if not np.isfinite(covmean).all():
        raise MorphaeusError(
            "matrix square root is non-finite even with a diagonal offset of "
            f"{eps}; cond(cov_a)={np.linalg.cond(a.cov):.3e}, "
            f"cond(cov_b)={np.linalg.cond(b.cov):.3e}"
        )
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    d2 = float(mu_d @ mu_d + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(covmean))
    return max(d2, 0.0)
