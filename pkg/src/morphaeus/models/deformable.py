"""The deformable auto-encoder: global prior plus dense local deformation.

The encoder halves the spatial extent once per stage until a 1x1 map
remains, which a 1x1 convolution projects to the latent code. Because the
latent has no spatial extent the decoder can only produce an image drawn
from what it learned globally; it cannot copy the input through. A small
head of transposed convolutions reads matched-resolution encoder and
decoder features and emits a dense displacement field that warps the
decoded prior onto the input, adapting pose and local shape without
granting the model a pixel highway.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from morphaeus.errors import ConfigurationError
from morphaeus.losses.warp import warp
from morphaeus.models.blocks import conv_block, default_filters, stages_for_resolution, tconv_block, up_block
from morphaeus.models.outputs import ModelOutput


@dataclass(frozen=True)
class MorphAEusConfig:
    """Architecture and loss-weight settings for the deformable AE.

    ``encoder_filters`` needs one entry per halving of the resolution
    (7 stages at 128, 6 at 64); None selects the default ladder. The
    deformation head is ``head_layers`` transposed convolutions of
    ``head_filters`` channels; its output is bounded by tanh scaled to
    ``max_displacement`` pixels (default: resolution / 16).
    """

    resolution: int = 128
    in_channels: int = 1
    encoder_filters: tuple[int, ...] | None = None
    latent_channels: int = 128
    head_filters: int = 32
    head_layers: int = 3
    max_displacement: float | None = None
    alpha: float = 0.05
    beta_start: float = 1e-3
    beta_end: float = 3.0
    deformation_start_epoch: int = 10

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be nonnegative, got {self.alpha}")
        if self.beta_start <= 0 or self.beta_end <= 0 or self.beta_end < self.beta_start:
            raise ConfigurationError(
                "beta endpoints must be positive and nondecreasing, got "
                f"({self.beta_start}, {self.beta_end})"
            )
        if self.deformation_start_epoch < 0:
            raise ConfigurationError("deformation start epoch must be nonnegative")

    def filters(self) -> tuple[int, ...]:
        if self.encoder_filters is not None:
            return tuple(self.encoder_filters)
        return default_filters(self.resolution)

    def displacement(self) -> float:
        if self.max_displacement is not None:
            return float(self.max_displacement)
        return self.resolution / 16.0


class MorphAEus(nn.Module):
    kind = "morphaeus"

    def __init__(self, cfg: MorphAEusConfig):
        super().__init__()
        depth = stages_for_resolution(cfg.resolution)
        filters = cfg.filters()
        if len(filters) != depth:
            raise ConfigurationError(
                f"resolution {cfg.resolution} halves to 1x1 in {depth} stages; "
                f"expected {depth} encoder filters, got {len(filters)}"
            )
        if depth < 3:
            raise ConfigurationError(
                f"need at least 3 encoder stages for the deformation tap, got {depth}"
            )
        self.cfg = cfg
        self.depth = depth
        # encoder feature after stage (depth - 2) sits at 4x4; the decoder
        # feature of the same size joins it as input to the head
        self.tap_stage = depth - 2

        chans = [cfg.in_channels, *filters]
        self.encoder = nn.ModuleList(
            conv_block(chans[i], chans[i + 1], pool=True) for i in range(depth)
        )
        self.to_latent = nn.Conv2d(filters[-1], cfg.latent_channels, kernel_size=1)

        self.from_latent = conv_block(cfg.latent_channels, filters[-1])
        mirror = [*filters[::-1], filters[0]]
        self.decoder = nn.ModuleList(
            up_block(mirror[i], mirror[i + 1]) for i in range(depth)
        )
        self.to_image = nn.Conv2d(filters[0], cfg.in_channels, kernel_size=1)

        enc_tap_ch = filters[self.tap_stage - 1]
        dec_tap_ch = mirror[depth - self.tap_stage]
        head = []
        prev = enc_tap_ch + dec_tap_ch
        for _ in range(cfg.head_layers):
            head.append(tconv_block(prev, cfg.head_filters))
            prev = cfg.head_filters
        self.head = nn.Sequential(*head)
        self.to_field = nn.Conv2d(cfg.head_filters, 2, kernel_size=1)
        # zero-initialized so training starts from the identity deformation
        nn.init.zeros_(self.to_field.weight)
        nn.init.zeros_(self.to_field.bias)

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Latent code and the encoder feature tapped for the head."""
        tap = None
        h = x
        for i, stage in enumerate(self.encoder, start=1):
            h = stage(h)
            if i == self.tap_stage:
                tap = h
        return self.to_latent(h), tap

    def decode(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Prior image and the decoder feature at the head's resolution."""
        tap = None
        h = self.from_latent(z)
        for i, stage in enumerate(self.decoder, start=1):
            h = stage(h)
            if i == self.depth - self.tap_stage:
                tap = h
        return torch.sigmoid(self.to_image(h)), tap

    def forward(self, x: torch.Tensor) -> ModelOutput:
        cfg = self.cfg
        if x.ndim != 4 or x.shape[1] != cfg.in_channels or x.shape[2:] != (
            cfg.resolution,
            cfg.resolution,
        ):
            raise ValueError(
                f"expected input (N, {cfg.in_channels}, {cfg.resolution}, "
                f"{cfg.resolution}), got {tuple(x.shape)}"
            )
        z, enc_tap = self.encode(x)
        prior, dec_tap = self.decode(z)
        h = self.head(torch.cat([enc_tap, dec_tap], dim=1))
        field = torch.tanh(self.to_field(h)) * self.cfg.displacement()
        if field.shape[2:] != x.shape[2:]:
            field = F.interpolate(
                field, size=x.shape[2:], mode="bilinear", align_corners=False
            )
        warped = warp(prior, field)
        return ModelOutput(
            prior=prior,
            field=field,
            warped=warped,
            latent=z,
            encoder_feature=enc_tap,
            decoder_feature=dec_tap,
        )


def build_morphaeus(cfg: MorphAEusConfig) -> MorphAEus:
    return MorphAEus(cfg)


def pseudo_healthy(model: MorphAEus, x: torch.Tensor) -> torch.Tensor:
    """Deformation-adapted reconstruction used for scoring and export."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model(x)
    finally:
        model.train(was_training)
    return out.reconstruction
