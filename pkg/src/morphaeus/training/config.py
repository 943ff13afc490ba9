"""Training hyperparameters shared by every model kind."""

from __future__ import annotations

from dataclasses import dataclass, field

from morphaeus.datasets.noise import NoiseSpec
from morphaeus.errors import ConfigurationError


@dataclass(frozen=True)
class TrainConfig:
    """One training run, reproducible from (config, data manifest, seed).

    Early stopping watches the validation total and counts an epoch as
    improving only when it beats the best seen by more than ``min_delta``.
    The deformation terms of the deformable model stay off for the first
    ``deformation_start_epoch`` epochs. ``use_perceptual`` and
    ``use_deformation`` exist for the ablation variants.
    """

    max_epochs: int = 1000
    batch_size: int = 16
    learning_rate: float = 5e-4
    patience: int = 25
    min_delta: float = 1e-9
    deformation_start_epoch: int = 10
    seed: int = 0
    grad_clip: float | None = None
    recon_loss: str = "l1"
    use_perceptual: bool = True
    use_deformation: bool = True
    # "gradient" penalizes field roughness, "magnitude" its size
    smoothness_kind: str = "gradient"
    # constrained-capacity settings (beta-vae)
    beta: float = 4.0
    gamma: float = 10.0
    capacity_end: float = 50.0
    # denoising settings (dae)
    noise: NoiseSpec | None = field(default=None)
    # adversarial weights (aae)
    adv_weight_error: float = 2.0
    adv_weight_latent: float = 2.0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigurationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigurationError(
                f"learning rate must be nonnegative, got {self.learning_rate}"
            )
        if self.patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {self.patience}")
        if self.min_delta < 0:
            raise ConfigurationError(f"min_delta must be >= 0, got {self.min_delta}")
        if self.deformation_start_epoch < 0:
            raise ConfigurationError("deformation start epoch must be nonnegative")
        if self.recon_loss not in ("l1", "l2"):
            raise ConfigurationError(
                f"recon_loss must be 'l1' or 'l2', got {self.recon_loss!r}"
            )
        if self.smoothness_kind not in ("gradient", "magnitude"):
            raise ConfigurationError(
                "smoothness_kind must be 'gradient' or 'magnitude', "
                f"got {self.smoothness_kind!r}"
            )
