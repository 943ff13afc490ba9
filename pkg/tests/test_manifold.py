"""Domain classifier and the manifold-learning test on stub models."""

import logging

import numpy as np
import pytest
import torch
from torch import nn

from morphaeus.datasets import generate_shape_dataset, load_image_folder
from morphaeus.errors import ConfigurationError, MorphaeusError
from morphaeus.losses import TinyFeatureExtractor
from morphaeus.metrics import (
    confidence,
    feature_stats,
    manifold_test,
    train_domain_classifier,
)
from morphaeus.models.outputs import ModelOutput


@pytest.fixture(scope="module")
def shapes(tmp_path_factory):
    root = generate_shape_dataset(
        tmp_path_factory.mktemp("shapes") / "data", n_per_class=40, resolution=16, seed=0
    )
    return load_image_folder(root, resolution=16, seed=0)


@pytest.fixture(scope="module")
def classifier(shapes):
    return train_domain_classifier(shapes, accuracy_floor=0.99, seed=0)


@pytest.fixture(scope="module")
def extractor():
    return TinyFeatureExtractor(in_channels=1)


@pytest.fixture(scope="module")
def circle_stats(shapes, extractor):
    images, labels = shapes.stack("train")
    circles = images[np.array(labels) == "circles"]
    return feature_stats(circles, extractor)


def _ood_images(shapes, n=20):
    images, labels = shapes.stack("train")
    labels = np.array(labels)
    return {
        "squares": images[labels == "squares"][:n],
        "crosses": images[labels == "crosses"][:n],
    }


class _IdentityModel(nn.Module):
    def forward(self, x):
        return ModelOutput(prior=x)


class _ConstantModel(nn.Module):
    """Always reconstructs one fixed image from the training class."""

    def __init__(self, image: np.ndarray):
        super().__init__()
        self.register_buffer("image", torch.from_numpy(image))

    def forward(self, x):
        return ModelOutput(prior=self.image.expand(len(x), *self.image.shape).clone())


class TestDomainClassifier:
    def test_reaches_floor_on_shapes(self, classifier):
        assert classifier.holdout_accuracy >= 0.99
        assert classifier.classes == ("circles", "crosses", "squares")

    def test_confidence_on_genuine_class(self, shapes, classifier):
        images, labels = shapes.stack("test")
        circles = images[np.array(labels) == "circles"]
        assert confidence(classifier, circles, "circles") >= 0.9

    def test_confidence_in_unit_interval_on_noise(self, classifier):
        noise = np.random.default_rng(0).random((10, 1, 16, 16), dtype=np.float32)
        c = confidence(classifier, noise, "squares")
        assert 0.0 <= c <= 1.0

    def test_unknown_target_class_rejected(self, classifier):
        with pytest.raises(ConfigurationError, match="class"):
            confidence(classifier, np.zeros((2, 1, 16, 16), dtype=np.float32), "spiral")

    def test_insufficient_capacity_raises(self, shapes):
        with pytest.raises(MorphaeusError, match="capacity"):
            train_domain_classifier(shapes, accuracy_floor=1.0, max_epochs=1, width=1,
                                    learning_rate=1e-7)

    def test_single_class_rejected(self, shapes):
        with pytest.raises(ConfigurationError, match="two classes"):
            train_domain_classifier(shapes.filter_label("circles"))


class TestManifoldTest:
    def test_identity_model_fails(self, shapes, classifier, extractor, circle_stats):
        result = manifold_test(
            _IdentityModel(), circle_stats, _ood_images(shapes), classifier, extractor,
            train_class="circles", min_samples=2,
        )
        assert not result.passed
        for name in ("squares", "crosses"):
            assert result.fid_recon_vs_train[name] == result.fid_input_vs_train[name]
        assert result.mean_fid_input > 0

    def test_constant_training_image_passes_confidence_clause(
        self, shapes, classifier, extractor, circle_stats
    ):
        images, labels = shapes.stack("train")
        one_circle = images[np.array(labels) == "circles"][0]
        result = manifold_test(
            _ConstantModel(one_circle), circle_stats, _ood_images(shapes), classifier,
            extractor, train_class="circles", min_samples=2,
        )
        assert result.confidence > 0.9
        assert max(result.confidences, key=result.confidences.get) == "circles"

    def test_result_serializes(self, shapes, classifier, extractor, circle_stats):
        result = manifold_test(
            _IdentityModel(), circle_stats, _ood_images(shapes, n=4), classifier,
            extractor, train_class="circles", min_samples=2,
        )
        d = result.as_dict()
        assert set(d) >= {"fid_recon_vs_train", "mean_fid_input", "confidences", "passed"}
        import json

        json.dumps(d)

    def test_small_class_warns_and_tiny_class_errors(
        self, shapes, classifier, extractor, circle_stats, caplog
    ):
        with caplog.at_level(logging.WARNING):
            manifold_test(
                _IdentityModel(), circle_stats, _ood_images(shapes, n=5), classifier,
                extractor, train_class="circles", min_samples=50,
            )
        assert any("only 5 samples" in r.getMessage() for r in caplog.records)
        with pytest.raises(ValueError, match="at least 2"):
            manifold_test(
                _IdentityModel(), circle_stats, _ood_images(shapes, n=1), classifier,
                extractor, train_class="circles",
            )

    def test_unknown_train_class_rejected(self, shapes, classifier, extractor, circle_stats):
        with pytest.raises(ConfigurationError, match="classifier"):
            manifold_test(
                _IdentityModel(), circle_stats, _ood_images(shapes), classifier,
                extractor, train_class="hexagons",
            )
