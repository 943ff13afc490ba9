"""Optimization loop, per-model recipes, and training history."""

from morphaeus.training.config import TrainConfig
from morphaeus.training.history import TrainHistory
from morphaeus.training.loop import EarlyStopper, train
from morphaeus.training.recipes import recipe

__all__ = ["EarlyStopper", "TrainConfig", "TrainHistory", "recipe", "train"]
