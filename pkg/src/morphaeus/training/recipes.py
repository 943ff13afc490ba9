"""Published per-model training regimes."""

from __future__ import annotations

import dataclasses

from morphaeus.datasets.noise import NoiseSpec
from morphaeus.errors import ConfigurationError
from morphaeus.training.config import TrainConfig

# The plain auto-encoders train with L1 at batch 64 / lr 5e-4; the
# denoising variant drops to batch 16 / lr 1e-4 with coarse input noise;
# the adversarial one runs large batches with gradient clipping. The
# variational kinds' batch and rate are not published; they follow the
# plain-AE regime. Same for the deformable model, which mirrors the
# best-result settings (batch 16, lr 5e-4).
_RECIPES: dict[str, dict] = {
    "morphaeus": dict(batch_size=16, learning_rate=5e-4),
    "spatial-ae": dict(batch_size=64, learning_rate=5e-4, recon_loss="l1"),
    "dense-ae": dict(batch_size=64, learning_rate=5e-4, recon_loss="l1"),
    "vae": dict(batch_size=64, learning_rate=5e-4, recon_loss="l2"),
    "beta-vae": dict(
        batch_size=64, learning_rate=5e-4, recon_loss="l2",
        beta=4.0, gamma=10.0, capacity_end=50.0,
    ),
    "dae": dict(batch_size=16, learning_rate=1e-4, recon_loss="l1", noise=NoiseSpec()),
    "aae": dict(
        batch_size=128, learning_rate=5e-4, recon_loss="l1",
        adv_weight_error=2.0, adv_weight_latent=2.0, grad_clip=5.0,
    ),
}


def recipe(kind: str, **overrides) -> TrainConfig:
    """TrainConfig preloaded with the published settings for one kind."""
    if kind not in _RECIPES:
        raise ConfigurationError(
            f"no training recipe for kind {kind!r}; known kinds: "
            f"{', '.join(sorted(_RECIPES))}"
        )
    settings = {**_RECIPES[kind], **overrides}
    valid = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(settings) - valid
    if unknown:
        raise ConfigurationError(
            f"unknown training settings for {kind}: {', '.join(sorted(unknown))}"
        )
    return TrainConfig(**settings)
