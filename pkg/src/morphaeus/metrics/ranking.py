"""Threshold-free detection metrics over scored samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class ScoreSet:
    """Anomaly scores with binary labels (1 = anomalous, higher = worse)."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        self.labels = np.asarray(self.labels).ravel().astype(np.int64)
        if self.scores.shape != self.labels.shape:
            raise ValueError(
                f"scores and labels differ in length: "
                f"{len(self.scores)} vs {len(self.labels)}"
            )
        if len(self.scores) == 0:
            raise ValueError("score set is empty")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 (normal) or 1 (anomalous)")

    @classmethod
    def from_groups(cls, normal_scores, anomalous_scores) -> "ScoreSet":
        normal = np.asarray(normal_scores, dtype=np.float64).ravel()
        anomalous = np.asarray(anomalous_scores, dtype=np.float64).ravel()
        return cls(
            scores=np.concatenate([normal, anomalous]),
            labels=np.concatenate([np.zeros(len(normal)), np.ones(len(anomalous))]),
        )

    @property
    def n_normal(self) -> int:
        return int((self.labels == 0).sum())

    @property
    def n_anomalous(self) -> int:
        return int((self.labels == 1).sum())


def _require_both_classes(s: ScoreSet) -> None:
    if s.n_normal == 0 or s.n_anomalous == 0:
        raise ValueError(
            f"ranking metrics need both classes, got {s.n_normal} normal and "
            f"{s.n_anomalous} anomalous samples"
        )


def auroc(s: ScoreSet) -> float:
    """Probability an anomalous score exceeds a normal one, ties counted half.

    Computed from average ranks (Mann-Whitney), which agrees exactly with
    the pairwise definition: rank sums and half-credits are exact binary
    fractions, so no tolerance is needed against a brute-force oracle.
    """
    _require_both_classes(s)
    ranks = rankdata(s.scores)
    n1 = s.n_anomalous
    u = ranks[s.labels == 1].sum() - n1 * (n1 + 1) / 2
    return float(u / (s.n_normal * n1))


def _threshold_counts(s: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (tp, fp) at each distinct descending threshold."""
    order = np.argsort(-s.scores, kind="mergesort")
    sorted_scores = s.scores[order]
    sorted_labels = s.labels[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(1 - sorted_labels)
    last_of_group = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    return tp[last_of_group], fp[last_of_group]


def auprc(s: ScoreSet) -> float:
    """Area under precision-recall by direct summation, no interpolation."""
    _require_both_classes(s)
    tp, fp = _threshold_counts(s)
    precision = tp / (tp + fp)
    recall = tp / s.n_anomalous
    prev_recall = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev_recall) * precision))


def fpr_at_tpr(s: ScoreSet, tpr: float) -> float:
    """Smallest false-positive rate among thresholds reaching the target TPR."""
    _require_both_classes(s)
    if not 0.0 < tpr <= 1.0:
        raise ValueError(f"target TPR must lie in (0, 1], got {tpr}")
    tp, fp = _threshold_counts(s)
    feasible = tp / s.n_anomalous >= tpr
    return float((fp[feasible] / s.n_normal).min())


def roc_points(s: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) arrays over all distinct thresholds, for plotting."""
    _require_both_classes(s)
    tp, fp = _threshold_counts(s)
    fpr = np.r_[0.0, fp / s.n_normal]
    tpr = np.r_[0.0, tp / s.n_anomalous]
    return fpr, tpr


def pr_points(s: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    """(recall, precision) arrays over all distinct thresholds."""
    _require_both_classes(s)
    tp, fp = _threshold_counts(s)
    return tp / s.n_anomalous, tp / (tp + fp)
