"""Domain classifier used by the manifold-learning test."""

from __future__ import annotations

import logging

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from morphaeus.errors import ConfigurationError, MorphaeusError
from morphaeus.models.blocks import conv_block, stages_for_resolution
from morphaeus.utils import derive_seed, seed_everything, to_tensor

log = logging.getLogger(__name__)


class DomainClassifier(nn.Module):
    """Small convolutional classifier over image source domains."""

    def __init__(self, classes, resolution: int, in_channels: int = 1, width: int = 32):
        super().__init__()
        classes = tuple(classes)
        if len(classes) < 2:
            raise ConfigurationError(f"need at least two classes, got {classes}")
        self.classes = classes
        self.resolution = resolution
        self.in_channels = in_channels
        self.width = width
        depth = min(3, stages_for_resolution(resolution))
        widths = [width * 2**i for i in range(depth)]
        chans = [in_channels, *widths]
        self.body = nn.Sequential(
            *(conv_block(chans[i], chans[i + 1], pool=True) for i in range(depth))
        )
        self.head = nn.Linear(widths[-1], len(classes))
        self.holdout_accuracy: float | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.body(x).mean(dim=(2, 3)))

    def predict_proba(self, images, batch_size: int = 128) -> np.ndarray:
        """(N, n_classes) softmax probabilities, rows in ``classes`` order."""
        x = to_tensor(images)
        was_training = self.training
        self.eval()
        rows = []
        with torch.no_grad():
            for lo in range(0, len(x), batch_size):
                rows.append(torch.softmax(self(x[lo : lo + batch_size]), dim=1).numpy())
        self.train(was_training)
        return np.concatenate(rows)


def confidence(classifier: DomainClassifier, images, target_class: str) -> float:
    """Mean softmax probability the classifier assigns to ``target_class``."""
    if target_class not in classifier.classes:
        raise ConfigurationError(
            f"class {target_class!r} not among classifier classes {classifier.classes}"
        )
    probs = classifier.predict_proba(images)
    return float(probs[:, classifier.classes.index(target_class)].mean())


def _accuracy(classifier: DomainClassifier, x: np.ndarray, y: np.ndarray) -> float:
    pred = classifier.predict_proba(x).argmax(axis=1)
    return float((pred == y).mean())


def train_domain_classifier(
    split,
    accuracy_floor: float = 0.99,
    max_epochs: int = 60,
    batch_size: int = 64,
    learning_rate: float = 1e-3,
    seed: int = 0,
    width: int = 32,
    polish_epochs: int = 5,
) -> DomainClassifier:
    """Train a classifier on a labelled split until it clears the floor.

    After held-out accuracy first reaches ``accuracy_floor``, training
    continues for ``polish_epochs`` more so the softmax sharpens beyond
    the bare decision boundary. Failing to hold the floor within
    ``max_epochs`` raises, since a weak classifier would invalidate every
    confidence number downstream.
    """
    classes = sorted({s.label for s in split.train})
    if len(classes) < 2:
        raise ConfigurationError(
            f"domain classifier needs at least two classes, found {classes}"
        )
    index = {c: k for k, c in enumerate(classes)}
    x_train, y_names = split.stack("train")
    y_train = np.array([index[name] for name in y_names])
    holdout = split.val if split.val else split.test
    if not holdout:
        raise ConfigurationError("domain classifier needs a held-out part (val or test)")
    x_hold = np.stack([s.image for s in holdout])
    y_hold = np.array([index[s.label] for s in holdout])

    seed_everything(derive_seed(seed, "classifier"))
    model = DomainClassifier(classes, split.resolution, in_channels=x_train.shape[1],
                             width=width)
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
    x_t = torch.from_numpy(x_train)
    y_t = torch.from_numpy(y_train)
    best = 0.0
    floor_met_at = None
    for epoch in range(max_epochs):
        order = np.random.default_rng(
            derive_seed(seed, "classifier-order", epoch)
        ).permutation(len(x_train))
        model.train()
        for lo in range(0, len(order), batch_size):
            idx = order[lo : lo + batch_size]
            if len(idx) == 1 and batch_size > 1:
                continue
            loss = F.cross_entropy(model(x_t[idx]), y_t[idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        acc = _accuracy(model, x_hold, y_hold)
        best = max(best, acc)
        if acc >= accuracy_floor:
            if floor_met_at is None:
                floor_met_at = epoch
            if epoch - floor_met_at >= polish_epochs or epoch == max_epochs - 1:
                log.info(
                    "domain classifier at %.4f held-out accuracy after epoch %d",
                    acc, epoch + 1,
                )
                model.holdout_accuracy = acc
                model.eval()
                return model
        else:
            floor_met_at = None
    raise MorphaeusError(
        f"domain classifier peaked at {best:.4f} held-out accuracy after "
        f"{max_epochs} epochs, below the {accuracy_floor} floor; increase its "
        "capacity (width) or allow more epochs"
    )
