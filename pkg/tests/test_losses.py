import math
from types import SimpleNamespace

import numpy as np
import pytest
import torch

from morphaeus.errors import ExtractorUnavailableError
from morphaeus.losses import (
    LossBreakdown,
    TinyFeatureExtractor,
    adversarial_terms,
    beta_schedule,
    beta_vae_objective,
    build_extractor,
    capacity_schedule,
    elbo,
    gaussian_kl,
    morphaeus_objective,
    perceptual,
    smoothness,
)

from oracles import finite_difference_grad, grad_rel_error, smoothness_oracle


# ---------------------------------------------------------------- smoothness


def test_smoothness_zero_for_constant_field():
    field = torch.full((3, 2, 10, 10), -2.5)
    assert float(smoothness(field)) == 0.0


@pytest.mark.parametrize("c", [0.5, 1.25])
def test_smoothness_of_linear_ramp_is_c_squared(c):
    xs = torch.arange(12, dtype=torch.float32)
    field = torch.zeros(1, 2, 12, 12)
    field[0, 0] = xs[None, :] * c
    assert float(smoothness(field)) == pytest.approx(c * c, rel=1e-6)


def test_smoothness_matches_loop_oracle():
    rng = np.random.default_rng(5)
    f = rng.normal(size=(2, 7, 9))
    got = float(smoothness(torch.from_numpy(f)[None]))
    assert got == pytest.approx(smoothness_oracle(f), rel=1e-10)


def test_smoothness_magnitude_kind():
    field = torch.full((1, 2, 4, 4), 3.0)
    assert float(smoothness(field, kind="magnitude")) == pytest.approx(9.0)
    with pytest.raises(ValueError):
        smoothness(field, kind="laplace")


def test_smoothness_gradient_matches_finite_differences():
    torch.manual_seed(17)
    f0 = torch.randn(1, 2, 8, 8, dtype=torch.float64)
    live = f0.clone().requires_grad_(True)
    analytic = torch.autograd.grad(smoothness(live), live)[0]
    probe = f0.clone()
    numeric = finite_difference_grad(lambda: smoothness(probe), probe)
    assert grad_rel_error(analytic, numeric) < 1e-4


# ---------------------------------------------------------------- perceptual


@pytest.fixture(scope="module")
def extractor():
    return TinyFeatureExtractor()


def test_perceptual_zero_on_identical_inputs(extractor):
    torch.manual_seed(0)
    x = torch.rand(2, 1, 32, 32)
    assert float(perceptual(x, x, extractor)) == 0.0


def test_perceptual_symmetric(extractor):
    torch.manual_seed(1)
    x = torch.rand(1, 1, 32, 32)
    y = torch.rand(1, 1, 32, 32)
    assert float(perceptual(x, y, extractor)) == pytest.approx(
        float(perceptual(y, x, extractor)), rel=1e-6
    )


def test_perceptual_penalizes_blur_more_than_offset_at_matched_mse(extractor):
    torch.manual_seed(2)
    base = torch.rand(1, 1, 64, 64)
    x = torch.nn.functional.avg_pool2d(base, 3, stride=1, padding=1)
    blurred = torch.nn.functional.avg_pool2d(x, 5, stride=1, padding=2)
    offset = (x - blurred).pow(2).mean().sqrt()
    shifted = x + offset
    assert torch.isclose(
        (blurred - x).pow(2).mean(), (shifted - x).pow(2).mean(), rtol=1e-5
    )
    assert float(perceptual(blurred, x, extractor)) > float(perceptual(shifted, x, extractor))


def test_tiny_extractor_deterministic_and_frozen(extractor):
    again = TinyFeatureExtractor()
    assert again.identity_hash == extractor.identity_hash
    x = torch.rand(1, 1, 16, 16)
    assert torch.equal(again.pooled(x), extractor.pooled(x))
    assert all(not p.requires_grad for p in extractor.parameters())
    extractor.train(True)
    assert not extractor.training
    assert extractor.pooled(x).shape == (1, extractor.embedding_dim)


def test_extractor_factory():
    tiny = build_extractor("tiny")
    assert tiny.name == "tiny"
    with pytest.raises(ExtractorUnavailableError):
        build_extractor("resnet-nope")


def test_vgg_extractor_works_or_explains_offline_install():
    try:
        vgg = build_extractor("vgg16")
    except ExtractorUnavailableError as exc:
        msg = str(exc)
        assert "vgg16" in msg
        assert "MORPHAEUS_EXTRACTOR_CACHE" in msg or "pretrained" in msg
    else:
        assert vgg.embedding_dim == 512
        assert all(not p.requires_grad for p in vgg.parameters())


def test_perceptual_gradient_matches_finite_differences():
    ext = TinyFeatureExtractor(widths=(4, 8)).double()
    torch.manual_seed(19)
    x0 = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    y = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    live = x0.clone().requires_grad_(True)
    analytic = torch.autograd.grad(perceptual(live, y, ext), live)[0]
    probe = x0.clone()
    numeric = finite_difference_grad(lambda: perceptual(probe, y, ext), probe)
    assert grad_rel_error(analytic, numeric) < 1e-3


# ----------------------------------------------------------------- schedules


def test_beta_schedule_endpoints_and_midpoint():
    assert beta_schedule(10, 100, start_epoch=10) == pytest.approx(1e-3)
    assert beta_schedule(100, 100, start_epoch=10) == pytest.approx(3.0)
    assert beta_schedule(55, 100, start_epoch=10) == pytest.approx((1e-3 + 3.0) / 2)


def test_beta_schedule_clamps_and_is_monotone():
    assert beta_schedule(0, 100) == pytest.approx(1e-3)
    assert beta_schedule(400, 100) == pytest.approx(3.0)
    values = [beta_schedule(e, 60, start_epoch=10) for e in range(0, 70)]
    assert all(b2 >= b1 for b1, b2 in zip(values, values[1:]))


def test_beta_schedule_rejects_degenerate_horizon():
    with pytest.raises(ValueError):
        beta_schedule(5, 10, start_epoch=10)
    with pytest.raises(ValueError):
        beta_schedule(5, 8, start_epoch=10)


def test_capacity_schedule():
    assert capacity_schedule(0, 40) == 0.0
    assert capacity_schedule(40, 40) == 50.0
    assert capacity_schedule(20, 40) == pytest.approx(25.0)
    assert capacity_schedule(99, 40) == 50.0
    with pytest.raises(ValueError):
        capacity_schedule(1, 0)


# -------------------------------------------------------------- vae objectives


def test_gaussian_kl_closed_form_points():
    assert float(gaussian_kl(torch.zeros(4, 8), torch.zeros(4, 8))) == 0.0
    one = torch.ones(1, 1)
    assert float(gaussian_kl(one, torch.zeros(1, 1))) == pytest.approx(0.5)


def test_gaussian_kl_matches_monte_carlo():
    torch.manual_seed(23)
    mu = torch.randn(1, 8, dtype=torch.float64)
    logvar = torch.randn(1, 8, dtype=torch.float64) * 0.5
    closed = float(gaussian_kl(mu, logvar))

    n = 200_000
    gen = torch.Generator().manual_seed(23)
    std = (0.5 * logvar).exp()
    z = mu + std * torch.randn(n, 8, generator=gen, dtype=torch.float64)
    log_q = (-0.5 * ((z - mu) / std) ** 2 - std.log() - 0.5 * math.log(2 * math.pi)).sum(1)
    log_p = (-0.5 * z**2 - 0.5 * math.log(2 * math.pi)).sum(1)
    diffs = log_q - log_p
    mc = float(diffs.mean())
    se = float(diffs.std() / math.sqrt(n))
    assert abs(closed - mc) < 3.0 * se + 1e-6


def test_elbo_zero_at_prior_match_with_perfect_reconstruction():
    x = torch.rand(3, 1, 8, 8)
    mu = torch.zeros(3, 16)
    logvar = torch.zeros(3, 16)
    assert float(elbo(x, x.clone(), mu, logvar)) == 0.0


def test_beta_vae_capacity_penalty():
    x = torch.rand(2, 1, 8, 8)
    mu = torch.ones(2, 4)
    logvar = torch.zeros(2, 4)
    kl = float(gaussian_kl(mu, logvar))
    got = float(beta_vae_objective(x, x.clone(), mu, logvar, capacity=5.0, gamma=10.0))
    assert got == pytest.approx(10.0 * abs(kl - 5.0), rel=1e-6)
    classic = float(beta_vae_objective(x, x.clone(), mu, logvar, capacity=None, beta=4.0))
    assert classic == pytest.approx(4.0 * kl, rel=1e-6)


# ------------------------------------------------------------- adversarial


def test_adversarial_uninformative_discriminator_gives_ln2():
    real = torch.randn(6, 4)
    fake = torch.randn(6, 4)
    gen, disc = adversarial_terms(real, fake, lambda z: torch.zeros(z.shape[0], 1))
    assert float(gen) == pytest.approx(math.log(2.0), abs=1e-6)
    assert float(disc) == pytest.approx(math.log(2.0), abs=1e-6)


def test_adversarial_perfect_discriminator_loss_vanishes():
    def oracle_disc(z):
        # huge positive logits for real batch, huge negative for fakes
        sign = 1.0 if bool(z.flatten()[0] > 0) else -1.0
        return torch.full((z.shape[0], 1), 50.0 * sign)

    real = torch.full((4, 2), 1.0)
    fake = torch.full((4, 2), -1.0)
    _, disc = adversarial_terms(real, fake, oracle_disc)
    assert float(disc) < 1e-6


def test_adversarial_matches_scalar_cross_entropy():
    torch.manual_seed(29)
    weights = torch.randn(3, 1)

    def disc(z):
        return z @ weights

    real = torch.randn(5, 3)
    fake = torch.randn(5, 3)
    gen, total = adversarial_terms(real, fake, disc)
    lr = (real @ weights).numpy().ravel().astype(np.float64)
    lf = (fake @ weights).numpy().ravel().astype(np.float64)
    expect_gen = np.logaddexp(0.0, -lf).mean()
    expect_disc = 0.5 * (np.logaddexp(0.0, -lr).mean() + np.logaddexp(0.0, lf).mean())
    assert float(gen) == pytest.approx(float(expect_gen), rel=1e-5)
    assert float(total) == pytest.approx(float(expect_disc), rel=1e-5)


def test_adversarial_detaches_fake_for_discriminator_loss():
    weights = torch.randn(2, 1, requires_grad=True)
    fake = torch.randn(4, 2, requires_grad=True)
    real = torch.randn(4, 2)
    gen, disc = adversarial_terms(real, fake, lambda z: z @ weights)
    disc.backward()
    assert fake.grad is None
    assert weights.grad is not None
    gen.backward()
    assert fake.grad is not None


# -------------------------------------------------------- joint objective


def _fake_output(prior, field):
    return SimpleNamespace(prior=prior, field=field, warped=None)


def test_objective_zeroes_deformation_terms_before_start_epoch(extractor):
    torch.manual_seed(31)
    x = torch.rand(2, 1, 16, 16)
    out = _fake_output(torch.rand(2, 1, 16, 16), torch.randn(2, 2, 16, 16))
    bd = morphaeus_objective(x, out, alpha=0.05, beta=1.0, epoch=5, start_epoch=10,
                             extractor=extractor)
    assert bd.lncc_term == 0.0
    assert bd.smoothness == 0.0
    assert bd.alpha == 0.05
    assert bd.total == bd.mse + 0.05 * bd.perceptual


def test_objective_total_recomposes_exactly(extractor):
    torch.manual_seed(37)
    x = torch.rand(2, 1, 16, 16)
    out = _fake_output(torch.rand(2, 1, 16, 16), 0.5 * torch.randn(2, 2, 16, 16))
    bd = morphaeus_objective(x, out, alpha=0.05, beta=0.7, epoch=20, start_epoch=10,
                             extractor=extractor)
    assert bd.total == bd.mse + bd.alpha * bd.perceptual + bd.lncc_term + bd.beta * bd.smoothness
    assert bd.lncc_term > 0.0
    assert bd.smoothness > 0.0
    assert float(bd.tensors["total"]) == pytest.approx(bd.total, rel=1e-6)


def test_objective_perfect_prior_and_zero_field_scores_zero(extractor):
    torch.manual_seed(41)
    x = torch.rand(1, 1, 16, 16)
    out = _fake_output(x.clone(), torch.zeros(1, 2, 16, 16))
    bd = morphaeus_objective(x, out, alpha=0.05, beta=2.0, epoch=50, start_epoch=10,
                             extractor=extractor)
    assert abs(bd.total) < 1e-5


def test_objective_rejects_negative_weights(extractor):
    x = torch.rand(1, 1, 16, 16)
    out = _fake_output(x.clone(), torch.zeros(1, 2, 16, 16))
    with pytest.raises(ValueError):
        morphaeus_objective(x, out, alpha=-0.1, beta=1.0, epoch=0, start_epoch=10,
                            extractor=TinyFeatureExtractor())
    with pytest.raises(ValueError):
        morphaeus_objective(x, out, alpha=0.05, beta=-1.0, epoch=0, start_epoch=10,
                            extractor=TinyFeatureExtractor())


def test_objective_stops_warp_gradients_at_prior_by_default(extractor):
    torch.manual_seed(43)
    x = torch.rand(1, 1, 16, 16)
    prior = torch.rand(1, 1, 16, 16, requires_grad=True)
    fld = (0.3 * torch.randn(1, 2, 16, 16)).requires_grad_(True)

    bd = morphaeus_objective(x, _fake_output(prior, fld), alpha=0.0, beta=0.0,
                             epoch=20, start_epoch=10, extractor=extractor)
    grads = torch.autograd.grad(bd.tensors["lncc_term"], [fld, prior],
                                allow_unused=True)
    assert grads[0] is not None
    assert grads[1] is None

    bd = morphaeus_objective(x, _fake_output(prior, fld), alpha=0.0, beta=0.0,
                             epoch=20, start_epoch=10, extractor=extractor,
                             detach_prior_for_warp=False)
    grads = torch.autograd.grad(bd.tensors["lncc_term"], [fld, prior],
                                allow_unused=True)
    assert grads[0] is not None
    assert grads[1] is not None


def test_loss_breakdown_dict_roundtrip():
    bd = LossBreakdown(mse=0.5, perceptual=2.0, lncc_term=0.25, smoothness=4.0,
                       alpha=0.05, beta=0.5)
    d = bd.as_dict()
    assert d["total"] == 0.5 + 0.05 * 2.0 + 0.25 + 0.5 * 4.0
    assert set(d) == {"mse", "perceptual", "lncc_term", "smoothness", "alpha", "beta", "total"}
