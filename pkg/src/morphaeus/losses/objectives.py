"""Training objectives: the deformable-AE loss and baseline objectives.

The deformable objective has two halves. The reconstruction half
(MSE + weighted perceptual loss) shapes the global prior produced by the
decoder. The deformation half (1 - LNCC on the warped prior, plus a
smoothness penalty on the field) trains the deformation head; it is held
at exactly zero for the first ``start_epoch`` epochs so the prior settles
before the head starts compensating for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import TYPE_CHECKING

import torch
import torch.nn.functional as F

from morphaeus.losses.lncc import lncc
from morphaeus.losses.perceptual import FeatureExtractor, perceptual
from morphaeus.losses.smoothness import smoothness
from morphaeus.losses.warp import warp

if TYPE_CHECKING:
    from morphaeus.models.outputs import ModelOutput


@dataclass
class LossBreakdown:
    """Scalar loss components for one batch, plus the weights in effect.

    ``total`` is recomposed from the float parts, so
    ``total == mse + alpha * perceptual + lncc_term + beta * smoothness``
    holds exactly. ``tensors`` carries the graph-attached total for the
    backward pass and is excluded from comparisons.
    """

    mse: float
    perceptual: float
    lncc_term: float
    smoothness: float
    alpha: float
    beta: float
    total: float = dc_field(init=False)
    tensors: dict | None = dc_field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.total = (
            self.mse
            + self.alpha * self.perceptual
            + self.lncc_term
            + self.beta * self.smoothness
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "mse": self.mse,
            "perceptual": self.perceptual,
            "lncc_term": self.lncc_term,
            "smoothness": self.smoothness,
            "alpha": self.alpha,
            "beta": self.beta,
            "total": self.total,
        }


def morphaeus_objective(
    x: torch.Tensor,
    out: "ModelOutput",
    alpha: float,
    beta: float,
    epoch: int,
    start_epoch: int,
    extractor: FeatureExtractor,
    lncc_window: int = 9,
    smoothness_kind: str = "gradient",
    detach_prior_for_warp: bool = True,
) -> LossBreakdown:
    """Joint objective for the deformable auto-encoder.

    Reconstruction gradients reach the encoder and decoder through the
    prior; deformation gradients reach the head through the field. With
    ``detach_prior_for_warp`` (the default) the warped image is recomputed
    from a detached prior, so the deformation half cannot degrade the
    prior to make its own job easier.

    Before ``start_epoch`` the lncc and smoothness terms are exactly zero
    and no deformation graph is built. A zero ``alpha`` skips the feature
    extractor entirely, so ablations that drop the perceptual term do not
    pay for it.
    """
    if alpha < 0 or beta < 0:
        raise ValueError(f"loss weights must be nonnegative, got alpha={alpha} beta={beta}")
    mse_t = F.mse_loss(out.prior, x)
    tensors = {"mse": mse_t}
    if alpha > 0:
        pl_t = perceptual(out.prior, x, extractor)
        tensors["perceptual"] = pl_t
        total_t = mse_t + alpha * pl_t
        pl_f = float(pl_t.detach())
    else:
        total_t = mse_t
        pl_f = 0.0
    lncc_f = 0.0
    smooth_f = 0.0
    if epoch >= start_epoch:
        prior = out.prior.detach() if detach_prior_for_warp else out.prior
        warped = warp(prior, out.field)
        lncc_t = 1.0 - lncc(warped, x, window=lncc_window)
        smooth_t = smoothness(out.field, kind=smoothness_kind)
        total_t = total_t + lncc_t + beta * smooth_t
        tensors["lncc_term"] = lncc_t
        tensors["smoothness"] = smooth_t
        lncc_f = float(lncc_t.detach())
        smooth_f = float(smooth_t.detach())
    tensors["total"] = total_t
    return LossBreakdown(
        mse=float(mse_t.detach()),
        perceptual=pl_f,
        lncc_term=lncc_f,
        smoothness=smooth_f,
        alpha=alpha,
        beta=beta,
        tensors=tensors,
    )


def beta_schedule(
    epoch: int,
    total_epochs: int,
    start_epoch: int = 10,
    start: float = 1e-3,
    end: float = 3.0,
) -> float:
    """Smoothness weight, linear from start_epoch to total_epochs, clamped."""
    if total_epochs <= start_epoch:
        raise ValueError(
            f"total_epochs ({total_epochs}) must exceed the deformation "
            f"start epoch ({start_epoch})"
        )
    if epoch <= start_epoch:
        return start
    if epoch >= total_epochs:
        return end
    t = (epoch - start_epoch) / (total_epochs - start_epoch)
    return start + t * (end - start)


def capacity_schedule(
    epoch: int, total_epochs: int, start: float = 0.0, end: float = 50.0
) -> float:
    """KL capacity target, linear from epoch 0 to total_epochs, clamped."""
    if total_epochs <= 0:
        raise ValueError(f"total_epochs must be positive, got {total_epochs}")
    t = min(max(epoch / total_epochs, 0.0), 1.0)
    return start + t * (end - start)


def gaussian_kl(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, diag exp(logvar)) || N(0, I)), summed over dims, batch mean."""
    per_sample = 0.5 * (mu.pow(2) + logvar.exp() - 1.0 - logvar).flatten(1).sum(dim=1)
    return per_sample.mean()


def elbo(
    x: torch.Tensor, recon: torch.Tensor, mu: torch.Tensor, logvar: torch.Tensor
) -> torch.Tensor:
    """Negative evidence lower bound with a Gaussian (L2) likelihood.

    The reconstruction term is summed over pixels and averaged over the
    batch so it stays on the same scale as the dimension-summed KL.
    """
    recon_term = (recon - x).pow(2).flatten(1).sum(dim=1).mean()
    return recon_term + gaussian_kl(mu, logvar)


def beta_vae_objective(
    x: torch.Tensor,
    recon: torch.Tensor,
    mu: torch.Tensor,
    logvar: torch.Tensor,
    capacity: float | None = None,
    beta: float = 4.0,
    gamma: float = 10.0,
) -> torch.Tensor:
    """Constrained-capacity VAE objective.

    With a capacity target C the KL is pulled toward C with strength gamma
    (penalty gamma * |KL - C|); without one the classic weighted form
    recon + beta * KL is used.
    """
    recon_term = (recon - x).pow(2).flatten(1).sum(dim=1).mean()
    kl = gaussian_kl(mu, logvar)
    if capacity is None:
        return recon_term + beta * kl
    return recon_term + gamma * (kl - capacity).abs()


def adversarial_terms(
    real: torch.Tensor, fake: torch.Tensor, discriminator
) -> tuple[torch.Tensor, torch.Tensor]:
    """Non-saturating GAN losses for generator and discriminator.

    The generator loss backpropagates into ``fake``; the discriminator
    loss sees ``fake`` detached. The discriminator loss averages its real
    and fake halves, so an uninformative discriminator (zero logits
    everywhere) scores ln 2 on both terms.
    """
    fake_logits = discriminator(fake)
    gen_loss = F.softplus(-fake_logits).mean()
    real_logits = discriminator(real)
    fake_logits_d = discriminator(fake.detach())
    disc_loss = 0.5 * (F.softplus(-real_logits).mean() + F.softplus(fake_logits_d).mean())
    return gen_loss, disc_loss
