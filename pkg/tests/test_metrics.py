"""Residual scores, heat maps, SSIM and perceptual distance."""

import numpy as np
import pytest
import torch

from morphaeus.datasets import SyntheticSpec, synthesize_pair
from morphaeus.losses import TinyFeatureExtractor
from morphaeus.metrics import anomaly_score, perceptual_distance, residual_heatmap, ssim

from oracles import ssim_oracle


class TestAnomalyScore:
    def test_zero_on_identical_for_all_modes(self):
        x = np.random.default_rng(0).random((4, 1, 8, 8), dtype=np.float32)
        for mode in ("mean-abs", "max-abs", "p95-abs"):
            assert np.all(anomaly_score(x, x.copy(), mode) == 0.0)

    def test_unit_offset_mean(self):
        x = np.ones((2, 1, 6, 6))
        recon = np.zeros((2, 1, 6, 6))
        assert np.allclose(anomaly_score(x, recon, "mean-abs"), 1.0)
        assert np.allclose(anomaly_score(x, recon, "max-abs"), 1.0)

    def test_single_image_returns_float(self):
        x = np.ones((1, 6, 6))
        out = anomaly_score(x, np.zeros_like(x))
        assert isinstance(out, float) and out == 1.0

    def test_p95_matches_sorted_percentile(self):
        rng = np.random.default_rng(3)
        x = rng.random((5, 1, 16, 16))
        recon = rng.random((5, 1, 16, 16))
        got = anomaly_score(x, recon, "p95-abs")
        for k in range(5):
            r = np.sort(np.abs(x[k] - recon[k]).ravel())
            pos = 0.95 * (len(r) - 1)
            lo = int(np.floor(pos))
            expected = r[lo] + (pos - lo) * (r[min(lo + 1, len(r) - 1)] - r[lo])
            assert got[k] == pytest.approx(expected, abs=1e-12)

    def test_mode_ordering(self):
        rng = np.random.default_rng(4)
        x = rng.random((3, 1, 12, 12))
        recon = rng.random((3, 1, 12, 12))
        mean = anomaly_score(x, recon, "mean-abs")
        p95 = anomaly_score(x, recon, "p95-abs")
        peak = anomaly_score(x, recon, "max-abs")
        assert np.all(mean <= p95) and np.all(p95 <= peak)

    def test_validation(self):
        x = np.zeros((2, 1, 8, 8))
        with pytest.raises(ValueError, match="shape"):
            anomaly_score(x, np.zeros((2, 1, 8, 9)))
        with pytest.raises(ValueError, match="mode"):
            anomaly_score(x, x, "median-abs")


class TestResidualHeatmap:
    def test_dimensions_match_input(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.random((1, 24, 24), dtype=np.float32)
        recon = rng.random((1, 24, 24), dtype=np.float32)
        out = tmp_path / "heat.png"
        img = residual_heatmap(x, recon, out)
        assert img.shape == (24, 24, 3) and img.dtype == np.uint8
        from PIL import Image

        assert Image.open(out).size == (24, 24)

    def test_identical_pair_renders_plain_input(self):
        x = np.random.default_rng(1).random((16, 16))
        img = residual_heatmap(x, x.copy())
        gray = (np.clip(x, 0, 1) * 255 + 0.5).astype(np.uint8)
        assert np.array_equal(img[..., 0], gray)
        assert np.array_equal(img[..., 0], img[..., 1])
        assert np.array_equal(img[..., 1], img[..., 2])

    def test_heat_concentrates_inside_anomaly(self):
        spec = SyntheticSpec(n_normal=4, n_anomalous=2, resolution=32, seed=5)
        normal, anomalous, mask = synthesize_pair(spec, 0)
        residual = np.abs(anomalous - normal)
        heat = residual / residual.max()
        assert heat[mask].mean() > 10 * heat[~mask].mean()
        img = residual_heatmap(anomalous, normal)
        base = residual_heatmap(anomalous, anomalous)
        changed = np.abs(img.astype(int) - base.astype(int)).sum(axis=2)
        assert changed[mask].mean() > changed[~mask].mean()

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            residual_heatmap(np.zeros((8, 8)), np.zeros((8, 9)))


class TestSsim:
    def test_self_similarity_is_one(self):
        x = np.random.default_rng(0).random((1, 1, 16, 16))
        assert ssim(x, x.copy()) == 1.0

    def test_symmetry_exact(self):
        rng = np.random.default_rng(1)
        a = rng.random((1, 1, 20, 20))
        b = rng.random((1, 1, 20, 20))
        assert ssim(a, b) == ssim(b, a)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        for seed in range(3):
            a = np.random.default_rng(seed).random((16, 16))
            b = np.random.default_rng(seed + 50).random((16, 16))
            assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-9)

    def test_binary_inversion_matches_oracle(self):
        rng = np.random.default_rng(7)
        x = (rng.random((16, 16)) > 0.5).astype(np.float64)
        got = ssim(x, 1.0 - x)
        assert got == pytest.approx(ssim_oracle(x, 1.0 - x), abs=1e-9)
        assert got < 0  # anticorrelated structure

    def test_range_and_ordering(self):
        rng = np.random.default_rng(3)
        x = rng.random((1, 1, 32, 32))
        noisy = np.clip(x + 0.05 * rng.standard_normal(x.shape), 0, 1)
        very_noisy = np.clip(x + 0.4 * rng.standard_normal(x.shape), 0, 1)
        s1, s2 = ssim(x, noisy), ssim(x, very_noisy)
        assert -1.0 < s2 < s1 < 1.0

    def test_window_validation(self):
        x = np.zeros((1, 1, 8, 8))
        with pytest.raises(ValueError, match="window"):
            ssim(x, x, window=11)  # does not fit into 8x8
        with pytest.raises(ValueError, match="odd"):
            ssim(np.zeros((1, 1, 16, 16)), np.zeros((1, 1, 16, 16)), window=4)


@pytest.fixture(scope="module")
def extractor():
    return TinyFeatureExtractor(in_channels=1)


class TestPerceptualDistance:
    def test_zero_diagnostic(self, extractor):
        x = np.random.default_rng(0).random((2, 1, 16, 16), dtype=np.float32)
        assert perceptual_distance(x, x.copy(), extractor) == 0.0

    def test_detects_structural_change(self, extractor):
        rng = np.random.default_rng(1)
        x = torch.from_numpy(rng.random((2, 1, 32, 32)).astype(np.float32))
        blurred = torch.nn.functional.avg_pool2d(x, 5, stride=1, padding=2)
        shifted = (x + 0.02).clamp(0, 1)
        assert perceptual_distance(x, blurred, extractor) > perceptual_distance(
            x, shifted, extractor
        )

    def test_symmetric(self, extractor):
        rng = np.random.default_rng(2)
        a = rng.random((1, 1, 16, 16), dtype=np.float32)
        b = rng.random((1, 1, 16, 16), dtype=np.float32)
        d1 = perceptual_distance(a, b, extractor)
        d2 = perceptual_distance(b, a, extractor)
        assert d1 == pytest.approx(d2, rel=1e-6)
