"""Model zoo: the deformable auto-encoder and its baseline family."""

from morphaeus.models.baselines import (
    BASELINE_KINDS,
    BaselineConfig,
    SpatialAutoEncoder,
    build_baseline,
)
from morphaeus.models.checkpoint import Checkpoint, load_checkpoint, rebuild_model, save_checkpoint
from morphaeus.models.deformable import MorphAEus, MorphAEusConfig, build_morphaeus, pseudo_healthy
from morphaeus.models.outputs import ModelOutput

__all__ = [
    "BASELINE_KINDS",
    "BaselineConfig",
    "Checkpoint",
    "ModelOutput",
    "MorphAEus",
    "MorphAEusConfig",
    "SpatialAutoEncoder",
    "build_baseline",
    "build_morphaeus",
    "load_checkpoint",
    "pseudo_healthy",
    "rebuild_model",
    "save_checkpoint",
]
