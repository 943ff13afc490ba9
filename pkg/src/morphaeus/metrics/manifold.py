"""Does a model pull out-of-distribution inputs onto its training manifold?

A reconstruction model trained on one domain passes when (a) its
reconstructions of foreign inputs sit measurably closer to the training
distribution than those inputs themselves, and (b) a domain classifier
reads the reconstructions as the training domain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from morphaeus.errors import ConfigurationError
from morphaeus.metrics.classifier import DomainClassifier
from morphaeus.metrics.frechet import FeatureStats, feature_stats, frechet_distance
from morphaeus.models import pseudo_healthy
from morphaeus.utils import to_tensor

log = logging.getLogger(__name__)


@dataclass
class ManifoldTestResult:
    """Per-class distances plus the derived verdict.

    ``passed`` is recomputed from the fields on construction: the mean
    reconstruction distance must undercut the mean input distance by the
    margin factor, and the classifier's highest mean confidence must land
    on the training class.
    """

    fid_recon_vs_train: dict[str, float]
    fid_input_vs_train: dict[str, float]
    confidences: dict[str, float]
    train_class: str
    margin: float = 0.95
    passed: bool = field(init=False)

    def __post_init__(self):
        closer = self.mean_fid_recon <= self.margin * self.mean_fid_input
        best = max(self.confidences, key=self.confidences.get)
        self.passed = bool(closer and best == self.train_class)

    @property
    def mean_fid_recon(self) -> float:
        return float(np.mean(list(self.fid_recon_vs_train.values())))

    @property
    def mean_fid_input(self) -> float:
        return float(np.mean(list(self.fid_input_vs_train.values())))

    @property
    def confidence(self) -> float:
        """Mean training-class confidence on the reconstructions."""
        return self.confidences[self.train_class]

    def as_dict(self) -> dict:
        return {
            "fid_recon_vs_train": dict(self.fid_recon_vs_train),
            "fid_input_vs_train": dict(self.fid_input_vs_train),
            "mean_fid_recon": self.mean_fid_recon,
            "mean_fid_input": self.mean_fid_input,
            "confidences": dict(self.confidences),
            "train_class": self.train_class,
            "margin": self.margin,
            "passed": self.passed,
        }


def manifold_test(
    model,
    train_stats: FeatureStats,
    ood_images: dict[str, np.ndarray],
    classifier: DomainClassifier,
    extractor,
    train_class: str,
    min_samples: int = 50,
    margin: float = 0.95,
) -> ManifoldTestResult:
    """Run the manifold-learning test against one trained model."""
    if train_class not in classifier.classes:
        raise ConfigurationError(
            f"training class {train_class!r} unknown to the classifier "
            f"(classes: {classifier.classes})"
        )
    if not ood_images:
        raise ConfigurationError("manifold test needs at least one foreign class")
    fid_recon: dict[str, float] = {}
    fid_input: dict[str, float] = {}
    recons = []
    for name in sorted(ood_images):
        x = to_tensor(ood_images[name])
        if len(x) < 2:
            raise ValueError(f"class {name!r} has {len(x)} samples; at least 2 required")
        if len(x) < min_samples:
            log.warning(
                "class %s has only %d samples (< %d); distances will be noisy",
                name, len(x), min_samples,
            )
        recon = pseudo_healthy(model, x)
        fid_input[name] = frechet_distance(feature_stats(x, extractor), train_stats)
        fid_recon[name] = frechet_distance(feature_stats(recon, extractor), train_stats)
        recons.append(recon.numpy())
    probs = classifier.predict_proba(np.concatenate(recons))
    confidences = {cls: float(probs[:, k].mean()) for k, cls in enumerate(classifier.classes)}
    return ManifoldTestResult(
        fid_recon_vs_train=fid_recon,
        fid_input_vs_train=fid_input,
        confidences=confidences,
        train_class=train_class,
        margin=margin,
    )
