"""Deformable auto-encoders for reconstruction-based anomaly detection.

The package trains a deformable auto-encoder (a global low-dimensional
image prior locally adapted by a dense displacement field) together with
a family of auto-encoder baselines, and evaluates them with
reconstruction-fidelity, manifold-learning and detection metrics.
"""

from morphaeus.errors import ConfigurationError, ExtractorUnavailableError, TrainingDivergedError

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ExtractorUnavailableError",
    "TrainingDivergedError",
    "__version__",
]
