"""Uniform forward-pass result shared by every model in the zoo."""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass
class ModelOutput:
    """What a reconstruction model produced for one batch.

    ``prior`` is always present: for the deformable model it is the global
    reconstruction before warping, for plain auto-encoders it is the
    reconstruction itself. ``field``/``warped`` exist only for models with
    a deformation head; ``mu``/``logvar`` only for variational models.
    ``encoder_feature``/``decoder_feature`` are the shared activations the
    deformation head consumed, kept for introspection.
    """

    prior: torch.Tensor
    field: torch.Tensor | None = None
    warped: torch.Tensor | None = None
    latent: torch.Tensor | None = None
    mu: torch.Tensor | None = None
    logvar: torch.Tensor | None = None
    encoder_feature: torch.Tensor | None = None
    decoder_feature: torch.Tensor | None = None

    @property
    def reconstruction(self) -> torch.Tensor:
        """The image residuals are scored against: warped if present."""
        return self.warped if self.warped is not None else self.prior

    def detached(self) -> "ModelOutput":
        def d(t):
            return t.detach() if t is not None else None

        return ModelOutput(
            prior=d(self.prior),
            field=d(self.field),
            warped=d(self.warped),
            latent=d(self.latent),
            mu=d(self.mu),
            logvar=d(self.logvar),
            encoder_feature=d(self.encoder_feature),
            decoder_feature=d(self.decoder_feature),
        )
