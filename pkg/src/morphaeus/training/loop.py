"""The optimization loop shared by every model kind."""

from __future__ import annotations

import copy
import logging
import math
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from morphaeus.datasets.noise import corrupt
from morphaeus.datasets.split import DatasetSplit
from morphaeus.errors import ConfigurationError, TrainingDivergedError
from morphaeus.losses import (
    adversarial_terms,
    beta_schedule,
    beta_vae_objective,
    capacity_schedule,
    elbo,
    gaussian_kl,
    morphaeus_objective,
    TinyFeatureExtractor,
)
from morphaeus.models.checkpoint import Checkpoint, save_checkpoint
from morphaeus.training.config import TrainConfig
from morphaeus.training.history import TrainHistory
from morphaeus.utils import derive_seed, seed_everything

log = logging.getLogger(__name__)


class EarlyStopper:
    """Stops after ``patience`` consecutive epochs without improvement.

    An epoch improves only when it beats the best value seen so far by
    strictly more than ``min_delta``.
    """

    def __init__(self, patience: int, min_delta: float):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.bad_epochs = 0

    def update(self, value: float) -> bool:
        if self.best - value > self.min_delta:
            self.best = value
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def _recon_loss(kind: str, recon: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    if kind == "l1":
        return F.l1_loss(recon, target)
    return F.mse_loss(recon, target)


class _Session:
    """Everything one run needs across epoch/batch boundaries."""

    def __init__(self, model, cfg: TrainConfig, extractor):
        self.model = model
        self.cfg = cfg
        self.kind = getattr(model, "kind", None)
        if self.kind is None:
            raise ConfigurationError("model does not declare its kind; cannot train")
        self.extractor = extractor
        if self.kind == "morphaeus" and cfg.use_perceptual and extractor is None:
            self.extractor = TinyFeatureExtractor(in_channels=model.cfg.in_channels)
        self.alpha = model.cfg.alpha if self.kind == "morphaeus" else 0.0
        if self.kind == "morphaeus" and not cfg.use_perceptual:
            self.alpha = 0.0
        if self.kind == "morphaeus" and cfg.use_deformation:
            self.start_epoch = cfg.deformation_start_epoch
            # the schedule spans deformation start to the final epoch
            self.horizon = max(cfg.max_epochs - 1, self.start_epoch + 1)
        else:
            self.start_epoch = cfg.max_epochs + 1
            self.horizon = None

        if self.kind == "aae":
            self.optimizer = torch.optim.Adam(
                model.generator_parameters(), lr=cfg.learning_rate
            )
            self.disc_optimizer = torch.optim.Adam(
                model.latent_discriminator.parameters(), lr=cfg.learning_rate
            )
        else:
            self.optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
            self.disc_optimizer = None

    def beta_at(self, epoch: int) -> float:
        if self.kind != "morphaeus" or not self.cfg.use_deformation:
            return 0.0
        m = self.model.cfg
        return beta_schedule(epoch, self.horizon, self.start_epoch, m.beta_start, m.beta_end)

    def capacity_at(self, epoch: int) -> float | None:
        if self.kind != "beta-vae":
            return None
        return capacity_schedule(epoch, self.cfg.max_epochs, end=self.cfg.capacity_end)

    def batch_loss(self, xb: torch.Tensor, epoch: int, tag, training: bool) -> dict:
        """Loss parts for one batch; key "_tensor" carries the graph."""
        cfg = self.cfg
        kind = self.kind
        if kind == "morphaeus":
            out = self.model(xb)
            bd = morphaeus_objective(
                xb, out, alpha=self.alpha, beta=self.beta_at(epoch), epoch=epoch,
                start_epoch=self.start_epoch, extractor=self.extractor,
                smoothness_kind=cfg.smoothness_kind,
            )
            parts = bd.as_dict()
            del parts["alpha"], parts["beta"]
            parts["_tensor"] = bd.tensors["total"]
            return parts
        if kind in ("spatial-ae", "dense-ae"):
            out = self.model(xb)
            loss = _recon_loss(cfg.recon_loss, out.reconstruction, xb)
            return {"recon": float(loss.detach()), "total": float(loss.detach()), "_tensor": loss}
        if kind == "dae":
            if cfg.noise is None:
                raise ConfigurationError("denoising training requires a noise spec")
            noisy = corrupt(
                xb.numpy(), cfg.noise, derive_seed(cfg.seed, "noise", *tag)
            )
            out = self.model(torch.from_numpy(noisy))
            loss = _recon_loss(cfg.recon_loss, out.reconstruction, xb)
            return {"recon": float(loss.detach()), "total": float(loss.detach()), "_tensor": loss}
        if kind == "vae":
            out = self.model(xb)
            loss = elbo(xb, out.prior, out.mu, out.logvar)
            kl = gaussian_kl(out.mu, out.logvar)
            return {
                "kl": float(kl.detach()),
                "recon": float(loss.detach()) - float(kl.detach()),
                "total": float(loss.detach()),
                "_tensor": loss,
            }
        if kind == "beta-vae":
            out = self.model(xb)
            capacity = self.capacity_at(epoch)
            loss = beta_vae_objective(
                xb, out.prior, out.mu, out.logvar,
                capacity=capacity, beta=cfg.beta, gamma=cfg.gamma,
            )
            kl = gaussian_kl(out.mu, out.logvar)
            return {"kl": float(kl.detach()), "total": float(loss.detach()), "_tensor": loss}
        if kind == "aae":
            disc = self.model.latent_discriminator
            out = self.model(xb)
            recon = _recon_loss(cfg.recon_loss, out.reconstruction, xb)
            prior_z = torch.randn_like(out.latent)
            gen_loss, disc_loss = adversarial_terms(prior_z, out.latent, disc)
            if training:
                self.disc_optimizer.zero_grad()
                disc_loss.backward()
                torch.nn.utils.clip_grad_norm_(disc.parameters(), cfg.grad_clip or 5.0)
                self.disc_optimizer.step()
                # the critic changed in place; score the latent against the
                # refreshed critic so the generator backward sees one version
                gen_loss = F.softplus(-disc(out.latent)).mean()
            total = cfg.adv_weight_error * recon + cfg.adv_weight_latent * gen_loss
            return {
                "recon": float(recon.detach()),
                "adv_gen": float(gen_loss.detach()),
                "adv_disc": float(disc_loss.detach()),
                "total": float(total.detach()),
                "_tensor": total,
            }
        raise ConfigurationError(f"no training objective for model kind {kind!r}")


def _epoch_mean(sums: dict[str, float], count: int) -> dict[str, float]:
    return {k: v / count for k, v in sums.items()}


def _batches(n: int, batch_size: int, order=None):
    idx = order if order is not None else np.arange(n)
    for lo in range(0, n, batch_size):
        yield idx[lo : lo + batch_size]


def train(
    model,
    split: DatasetSplit,
    cfg: TrainConfig,
    checkpoint_path: str | Path | None = None,
    extractor=None,
    progress: bool = True,
) -> tuple[Checkpoint, TrainHistory]:
    """Optimize a model on a split and return best weights plus history.

    Stops at ``cfg.max_epochs`` or when validation stalls for
    ``cfg.patience`` epochs; the best-validation weights are restored into
    the model and captured in the returned checkpoint. When the deformation
    terms switch on mid-run the monitored total changes meaning (it gains
    the alignment and smoothness terms), so the stopper and best-weight
    tracking restart at the activation epoch; otherwise the pre-activation
    minimum would always win and the deformation could never reach a
    checkpoint. Determinism: the run is a pure function of (model init,
    split, config).
    """
    train_x, _ = split.stack("train")
    if len(train_x) < 2:
        raise ConfigurationError(
            f"training split needs at least 2 samples, got {len(train_x)}"
        )
    val_x, _ = split.stack("val")
    if len(val_x) == 0:
        log.warning("validation split empty; monitoring training data instead")
        val_x = train_x

    seed_everything(derive_seed(cfg.seed, "train"))
    session = _Session(model, cfg, extractor)
    stopper = EarlyStopper(cfg.patience, cfg.min_delta)
    history = TrainHistory()
    best_state = None
    best_epoch = 0

    train_t = torch.from_numpy(train_x)
    val_t = torch.from_numpy(val_x)

    for epoch in range(cfg.max_epochs):
        if epoch == session.start_epoch and epoch > 0:
            # objective gains the deformation terms here; earlier totals
            # are not comparable, so the improvement race restarts
            stopper = EarlyStopper(cfg.patience, cfg.min_delta)
        started = time.monotonic()
        order = np.random.default_rng(derive_seed(cfg.seed, "order", epoch)).permutation(
            len(train_x)
        )
        model.train()
        sums: dict[str, float] = {}
        seen = 0
        for step, batch_idx in enumerate(_batches(len(train_x), cfg.batch_size, order)):
            if len(batch_idx) == 1 and cfg.batch_size > 1:
                continue  # batch statistics are undefined on single samples
            xb = train_t[batch_idx]
            parts = session.batch_loss(xb, epoch, tag=(epoch, step), training=True)
            loss = parts.pop("_tensor")
            if not all(math.isfinite(v) for v in parts.values()):
                log.error("diverged at epoch %d: %s", epoch + 1, parts)
                raise TrainingDivergedError(epoch + 1, parts)
            session.optimizer.zero_grad()
            loss.backward()
            if cfg.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            session.optimizer.step()
            for key, value in parts.items():
                sums[key] = sums.get(key, 0.0) + value * len(batch_idx)
            seen += len(batch_idx)

        model.eval()
        val_sums: dict[str, float] = {}
        val_seen = 0
        with torch.no_grad():
            for step, batch_idx in enumerate(_batches(len(val_x), cfg.batch_size)):
                xb = val_t[batch_idx]
                parts = session.batch_loss(xb, epoch, tag=("val", step), training=False)
                parts.pop("_tensor")
                for key, value in parts.items():
                    val_sums[key] = val_sums.get(key, 0.0) + value * len(batch_idx)
                val_seen += len(batch_idx)

        row = {"epoch": epoch + 1, "beta": session.beta_at(epoch)}
        capacity = session.capacity_at(epoch)
        if capacity is not None:
            row["capacity"] = capacity
        for key, value in _epoch_mean(sums, max(seen, 1)).items():
            row[f"train_{key}"] = value
        for key, value in _epoch_mean(val_sums, max(val_seen, 1)).items():
            row[f"val_{key}"] = value
        row["wall_clock"] = time.monotonic() - started
        history.add(row)

        val_total = row["val_total"]
        if not math.isfinite(val_total):
            log.error("diverged at epoch %d: %s", epoch + 1, row)
            raise TrainingDivergedError(epoch + 1, {"val_total": val_total})
        if stopper.update(val_total):
            best_state = copy.deepcopy(model.state_dict())
            best_epoch = epoch + 1
        if progress:
            print(
                f"epoch={epoch + 1} kind={session.kind} "
                f"train_total={row.get('train_total', float('nan')):.6g} "
                f"val_total={val_total:.6g} beta={row['beta']:.6g}",
                flush=True,
            )
        if stopper.should_stop:
            break

    if best_state is not None:
        model.load_state_dict(best_state)

    extra = {
        "val_loss": stopper.best,
        "seed": cfg.seed,
        "epochs_run": len(history),
        "best_epoch": best_epoch,
    }
    if checkpoint_path is not None:
        path = save_checkpoint(checkpoint_path, model, epoch=best_epoch, extra=extra)
        history.best_checkpoint = str(path)
        ckpt = Checkpoint(
            kind=session.kind, config=model.cfg,
            state_dict={k: v.cpu() for k, v in model.state_dict().items()},
            epoch=best_epoch, extra=extra,
        )
    else:
        ckpt = Checkpoint(
            kind=session.kind, config=model.cfg,
            state_dict={k: v.cpu().clone() for k, v in model.state_dict().items()},
            epoch=best_epoch, extra=extra,
        )
    return ckpt, history
