import json
import logging

import numpy as np
import pytest
from PIL import Image

from morphaeus.datasets import (
    NoiseSpec,
    SyntheticSpec,
    corrupt,
    generate_shape_dataset,
    load_image_folder,
    make_synthetic,
    sample_ood,
    split_counts,
    synthesize_pair,
)
from morphaeus.errors import ConfigurationError


@pytest.fixture(scope="module")
def shape_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("shapes")
    generate_shape_dataset(root, n_per_class=30, resolution=32, seed=3)
    return root


# ------------------------------------------------------------------ splits


def test_split_counts_match_80_10_10():
    assert split_counts(10000) == (8000, 1000, 1000)
    assert split_counts(1) == (1, 0, 0)
    assert split_counts(200) == (160, 20, 20)
    for n in range(1, 300):
        tr, va, te = split_counts(n)
        assert tr + va + te == n
        assert abs(va - 0.1 * n) <= 1 and abs(te - 0.1 * n) <= 1
        assert abs(tr - 0.8 * n) <= 2


def test_folder_split_is_deterministic_and_disjoint(shape_root):
    split = load_image_folder(shape_root, resolution=24, seed=7)
    again = load_image_folder(shape_root, resolution=24, seed=7)
    assert split.manifest_hash() == again.manifest_hash()
    assert json.dumps(split.manifest(), sort_keys=True) == json.dumps(
        again.manifest(), sort_keys=True
    )

    other = load_image_folder(shape_root, resolution=24, seed=8)
    assert split.manifest_hash() != other.manifest_hash()

    ids = [s.id for part in ("train", "val", "test") for s in split.part(part)]
    assert len(ids) == len(set(ids)) == 90
    for label in ("circles", "squares", "crosses"):
        per = split.filter_label(label)
        assert (len(per.train), len(per.val), len(per.test)) == (24, 3, 3)


def test_folder_images_normalized(shape_root):
    split = load_image_folder(shape_root, resolution=24, seed=7)
    images, labels = split.stack("train")
    assert images.shape == (72, 1, 24, 24)
    assert images.dtype == np.float32
    assert images.min() >= 0.0 and images.max() <= 1.0
    assert set(labels) == {"circles", "squares", "crosses"}


def test_folder_errors_and_skips(tmp_path, caplog):
    with pytest.raises(ConfigurationError):
        load_image_folder(tmp_path / "missing", resolution=16, seed=0)
    (tmp_path / "empty").mkdir()
    with pytest.raises(ConfigurationError):
        load_image_folder(tmp_path / "empty", resolution=16, seed=0)

    root = tmp_path / "data"
    (root / "a").mkdir(parents=True)
    Image.new("RGB", (20, 20), (120, 40, 200)).save(root / "a" / "ok.png")
    (root / "a" / "broken.png").write_bytes(b"not a png at all")
    with caplog.at_level(logging.WARNING):
        split = load_image_folder(root, resolution=16, seed=0)
    assert split.skipped == {"a": 1}
    assert "broken.png" in caplog.text
    assert len(split.train) == 1 and not split.val and not split.test
    assert split.manifest()["skipped"] == {"a": 1}


def test_ood_sampling(shape_root):
    imgs = sample_ood(shape_root, "circles", 5, seed=11, resolution=24)
    assert len(imgs) == 5
    for img in imgs:
        assert img.shape == (1, 24, 24)
        assert img.min() >= 0.0 and img.max() <= 1.0
    again = sample_ood(shape_root, "circles", 5, seed=11, resolution=24)
    assert all(np.array_equal(a, b) for a, b in zip(imgs, again))
    assert sample_ood(shape_root, "squares", 0, seed=1, resolution=24) == []
    with pytest.raises(ConfigurationError, match="short by 70"):
        sample_ood(shape_root, "circles", 100, seed=1, resolution=24)
    with pytest.raises(ConfigurationError):
        sample_ood(shape_root, "triangles", 1, seed=1, resolution=24)


# --------------------------------------------------------------- synthetic


def test_synthetic_counts_and_masks():
    split, masks = make_synthetic(SyntheticSpec(n_normal=200, n_anomalous=50, resolution=32))
    assert (len(split.train), len(split.val)) == (160, 20)
    assert len(split.test) == 70
    anomalous = [s for s in split.test if s.label == "anomaly"]
    assert len(anomalous) == 50
    assert set(masks) == {s.id for s in anomalous}
    for s in anomalous:
        assert masks[s.id].shape == (32, 32)
        assert masks[s.id].dtype == bool
        assert masks[s.id].any()


def test_synthetic_anomaly_confined_to_mask():
    spec = SyntheticSpec(n_normal=0, n_anomalous=10, resolution=64, seed=5)
    for i in range(10):
        normal, anomalous, mask = synthesize_pair(spec, i)
        assert np.array_equal(normal[~mask], anomalous[~mask])
        assert (anomalous[mask] >= normal[mask]).all()


def test_synthetic_zero_delta_leaves_images_unchanged():
    spec = SyntheticSpec(n_anomalous=5, resolution=32, intensity_delta=0.0, seed=9)
    for i in range(5):
        normal, anomalous, _ = synthesize_pair(spec, i)
        assert np.array_equal(normal, anomalous)


def test_synthetic_blob_contrast():
    spec = SyntheticSpec(n_anomalous=10, resolution=64, intensity_delta=0.5, seed=1)
    for i in range(10):
        _, anomalous, mask = synthesize_pair(spec, i)
        contrast = anomalous[mask].mean() - anomalous[~mask].mean()
        assert contrast >= 0.9 * 0.5


def test_synthetic_determinism_and_validation():
    spec = SyntheticSpec(n_normal=12, n_anomalous=3, resolution=16, seed=4)
    a, _ = make_synthetic(spec)
    b, _ = make_synthetic(spec)
    assert a.manifest_hash() == b.manifest_hash()
    assert all(
        np.array_equal(x.image, y.image) for x, y in zip(a.train + a.test, b.train + b.test)
    )
    with pytest.raises(ConfigurationError):
        make_synthetic(SyntheticSpec(resolution=8))
    with pytest.raises(ConfigurationError):
        make_synthetic(SyntheticSpec(n_normal=-1))
    with pytest.raises(ConfigurationError):
        make_synthetic(SyntheticSpec(intensity_delta=1.5))


# ------------------------------------------------------------------- noise


def test_corrupt_zero_magnitude_is_identity():
    batch = np.random.default_rng(0).random((4, 1, 16, 16)).astype(np.float32)
    out = corrupt(batch, NoiseSpec(magnitude=0.0), seed=3)
    assert np.array_equal(out, batch)
    assert out is not batch


def test_corrupt_validation():
    batch = np.full((2, 1, 16, 16), 0.5, dtype=np.float32)
    with pytest.raises(ValueError):
        corrupt(batch, NoiseSpec(magnitude=-0.1), seed=0)
    with pytest.raises(ValueError):
        corrupt(batch, NoiseSpec(kind="salt"), seed=0)
    with pytest.raises(ValueError):
        corrupt(batch, NoiseSpec(coarseness=0), seed=0)
    with pytest.raises(ValueError):
        corrupt(batch + 1.0, NoiseSpec(), seed=0)


def test_corrupt_noise_statistics():
    batch = np.full((1000, 1, 16, 16), 0.5, dtype=np.float32)
    out = corrupt(batch, NoiseSpec(magnitude=0.2, coarseness=8), seed=21)
    assert out.min() >= 0.0 and out.max() <= 1.0
    noise = out - batch
    assert abs(noise.mean()) < 0.005
    assert noise.std() == pytest.approx(0.2, abs=0.02)


def test_corrupt_coarseness_produces_smooth_fields():
    batch = np.full((8, 1, 128, 128), 0.5, dtype=np.float32)
    noise = corrupt(batch, NoiseSpec(magnitude=0.2, coarseness=8), seed=2) - batch
    adjacent = np.abs(noise[..., 1:] - noise[..., :-1]).mean()
    assert adjacent < 0.3 * noise.std()

    # a grid no finer than the image itself degenerates to one value/sample
    flat = corrupt(batch, NoiseSpec(magnitude=0.2, coarseness=128), seed=2) - batch
    spans = flat.reshape(8, -1).max(axis=1) - flat.reshape(8, -1).min(axis=1)
    assert (spans < 1e-6).all()


def test_corrupt_deterministic_per_seed():
    batch = np.full((3, 1, 32, 32), 0.4, dtype=np.float32)
    a = corrupt(batch, NoiseSpec(), seed=5)
    b = corrupt(batch, NoiseSpec(), seed=5)
    c = corrupt(batch, NoiseSpec(), seed=6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
