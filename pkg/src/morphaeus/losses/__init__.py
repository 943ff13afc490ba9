from morphaeus.losses.lncc import lncc
from morphaeus.losses.objectives import (
    LossBreakdown,
    adversarial_terms,
    beta_schedule,
    beta_vae_objective,
    capacity_schedule,
    elbo,
    gaussian_kl,
    morphaeus_objective,
)
from morphaeus.losses.perceptual import (
    FeatureExtractor,
    TinyFeatureExtractor,
    VggFeatureExtractor,
    build_extractor,
    perceptual,
)
from morphaeus.losses.smoothness import smoothness
from morphaeus.losses.warp import warp

__all__ = [
    "FeatureExtractor",
    "LossBreakdown",
    "TinyFeatureExtractor",
    "VggFeatureExtractor",
    "adversarial_terms",
    "beta_schedule",
    "beta_vae_objective",
    "build_extractor",
    "capacity_schedule",
    "elbo",
    "gaussian_kl",
    "lncc",
    "morphaeus_objective",
    "perceptual",
    "smoothness",
    "warp",
]
