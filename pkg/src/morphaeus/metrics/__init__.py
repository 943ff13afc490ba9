"""Evaluation metrics: fidelity, feature distances, ranking, manifold test."""

from morphaeus.metrics.classifier import DomainClassifier, confidence, train_domain_classifier
from morphaeus.metrics.frechet import FeatureStats, feature_stats, frechet_distance
from morphaeus.metrics.manifold import ManifoldTestResult, manifold_test
from morphaeus.metrics.ranking import (
    ScoreSet,
    auprc,
    auroc,
    fpr_at_tpr,
    pr_points,
    roc_points,
)
from morphaeus.metrics.scores import (
    SCORE_MODES,
    anomaly_score,
    perceptual_distance,
    residual_heatmap,
)
from morphaeus.metrics.ssim import ssim

__all__ = [
    "DomainClassifier",
    "FeatureStats",
    "ManifoldTestResult",
    "SCORE_MODES",
    "ScoreSet",
    "anomaly_score",
    "auprc",
    "auroc",
    "confidence",
    "feature_stats",
    "fpr_at_tpr",
    "frechet_distance",
    "manifold_test",
    "perceptual_distance",
    "pr_points",
    "residual_heatmap",
    "roc_points",
    "ssim",
    "train_domain_classifier",
]
