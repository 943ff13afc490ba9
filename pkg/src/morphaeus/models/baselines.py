"""Baseline auto-encoder family sharing one forward contract.

Six kinds are supported; architecture is shared where the original
configurations coincide. The denoising AE reuses the spatial architecture
(corruption happens in the training loop), and the constrained-capacity
VAE reuses the variational architecture (only the objective differs).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from morphaeus.errors import ConfigurationError
from morphaeus.models.blocks import conv_block, default_filters, stages_for_resolution, up_block
from morphaeus.models.outputs import ModelOutput

BASELINE_KINDS = ("spatial-ae", "dense-ae", "vae", "beta-vae", "dae", "aae")


@dataclass(frozen=True)
class BaselineConfig:
    """Shared architecture settings for the baseline family.

    ``latent_dim`` applies to the flat-bottleneck kinds (dense-ae, vae,
    beta-vae, aae); ``latent_channels`` and ``spatial_depth`` to the
    spatial kinds (spatial-ae, dae). Defaults follow the original
    configurations (512-dimensional flat latents).
    """

    resolution: int = 128
    in_channels: int = 1
    encoder_filters: tuple[int, ...] | None = None
    latent_dim: int = 512
    latent_channels: int = 16
    spatial_depth: int | None = None

    def filters(self) -> tuple[int, ...]:
        if self.encoder_filters is not None:
            return tuple(self.encoder_filters)
        return default_filters(self.resolution)


def _check_input(x: torch.Tensor, cfg: BaselineConfig) -> None:
    if x.ndim != 4 or x.shape[1] != cfg.in_channels or x.shape[2:] != (
        cfg.resolution,
        cfg.resolution,
    ):
        raise ValueError(
            f"expected input (N, {cfg.in_channels}, {cfg.resolution}, "
            f"{cfg.resolution}), got {tuple(x.shape)}"
        )


class SpatialAutoEncoder(nn.Module):
    """Auto-encoder whose bottleneck keeps spatial extent.

    ``depth`` counts pooling stages; the latent sits at
    resolution / 2^depth. Shallow instances can pass inputs through
    nearly unchanged, deep ones must compress; the depth sweep diagnostic
    exploits exactly that.
    """

    def __init__(self, cfg: BaselineConfig, depth: int | None = None):
        super().__init__()
        max_depth = stages_for_resolution(cfg.resolution)
        depth = depth if depth is not None else cfg.spatial_depth
        if depth is None:
            depth = max(1, max_depth - 3)
        if not 1 <= depth <= max_depth:
            raise ConfigurationError(
                f"spatial depth must lie in [1, {max_depth}] for resolution "
                f"{cfg.resolution}, got {depth}"
            )
        self.cfg = cfg
        self.depth = depth
        filters = cfg.filters()[:depth]
        chans = [cfg.in_channels, *filters]
        self.encoder = nn.Sequential(
            *(conv_block(chans[i], chans[i + 1], pool=True) for i in range(depth))
        )
        self.to_latent = nn.Conv2d(filters[-1], cfg.latent_channels, kernel_size=1)
        self.from_latent = conv_block(cfg.latent_channels, filters[-1])
        mirror = [*filters[::-1], filters[0]]
        self.decoder = nn.Sequential(
            *(up_block(mirror[i], mirror[i + 1]) for i in range(depth))
        )
        self.to_image = nn.Conv2d(filters[0], cfg.in_channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> ModelOutput:
        _check_input(x, self.cfg)
        z = self.to_latent(self.encoder(x))
        recon = torch.sigmoid(self.to_image(self.decoder(self.from_latent(z))))
        return ModelOutput(prior=recon, latent=z)


class _DenseSpine(nn.Module):
    """Conv stack down to 4x4 with flat projections, shared by dense kinds."""

    def __init__(self, cfg: BaselineConfig):
        super().__init__()
        depth = stages_for_resolution(cfg.resolution) - 2
        self.cfg = cfg
        self.depth = depth
        filters = cfg.filters()[:depth]
        chans = [cfg.in_channels, *filters]
        self.encoder = nn.Sequential(
            *(conv_block(chans[i], chans[i + 1], pool=True) for i in range(depth))
        )
        self.flat_dim = filters[-1] * 16
        self.from_latent = nn.Linear(cfg.latent_dim, self.flat_dim)
        mirror = [*filters[::-1], filters[0]]
        self.decoder = nn.Sequential(
            *(up_block(mirror[i], mirror[i + 1]) for i in range(depth))
        )
        self.to_image = nn.Conv2d(filters[0], cfg.in_channels, kernel_size=1)

    def encode_flat(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x).flatten(1)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        h = self.from_latent(z).reshape(z.shape[0], -1, 4, 4)
        return torch.sigmoid(self.to_image(self.decoder(h)))


class DenseAutoEncoder(_DenseSpine):
    def __init__(self, cfg: BaselineConfig):
        super().__init__(cfg)
        self.to_latent = nn.Linear(self.flat_dim, cfg.latent_dim)

    def forward(self, x: torch.Tensor) -> ModelOutput:
        _check_input(x, self.cfg)
        z = self.to_latent(self.encode_flat(x))
        return ModelOutput(prior=self.decode(z), latent=z)


class VariationalAutoEncoder(_DenseSpine):
    def __init__(self, cfg: BaselineConfig):
        super().__init__(cfg)
        self.to_mu = nn.Linear(self.flat_dim, cfg.latent_dim)
        self.to_logvar = nn.Linear(self.flat_dim, cfg.latent_dim)

    def forward(self, x: torch.Tensor) -> ModelOutput:
        _check_input(x, self.cfg)
        h = self.encode_flat(x)
        mu = self.to_mu(h)
        logvar = self.to_logvar(h)
        if self.training:
            z = mu + torch.randn_like(mu) * (0.5 * logvar).exp()
        else:
            z = mu
        return ModelOutput(prior=self.decode(z), latent=z, mu=mu, logvar=logvar)


class AdversarialAutoEncoder(_DenseSpine):
    """Deterministic encoder whose latent is pushed toward N(0, I).

    The latent discriminator is part of the module (so checkpoints carry
    it) but is optimized separately from the encoder/decoder.
    """

    def __init__(self, cfg: BaselineConfig):
        super().__init__(cfg)
        self.to_latent = nn.Linear(self.flat_dim, cfg.latent_dim)
        width = 256 * max(1, cfg.resolution // 32)
        self.latent_discriminator = nn.Sequential(
            nn.Linear(cfg.latent_dim, width),
            nn.LeakyReLU(0.2),
            nn.Linear(width, width // 2),
            nn.LeakyReLU(0.2),
            nn.Linear(width // 2, 1),
        )

    def generator_parameters(self):
        disc = set(id(p) for p in self.latent_discriminator.parameters())
        return (p for p in self.parameters() if id(p) not in disc)

    def forward(self, x: torch.Tensor) -> ModelOutput:
        _check_input(x, self.cfg)
        z = self.to_latent(self.encode_flat(x))
        return ModelOutput(prior=self.decode(z), latent=z)


def build_baseline(kind: str, cfg: BaselineConfig) -> nn.Module:
    builders = {
        "spatial-ae": SpatialAutoEncoder,
        "dense-ae": DenseAutoEncoder,
        "vae": VariationalAutoEncoder,
        "beta-vae": VariationalAutoEncoder,
        "dae": SpatialAutoEncoder,
        "aae": AdversarialAutoEncoder,
    }
    if kind not in builders:
        raise ConfigurationError(
            f"unknown model kind {kind!r}; supported kinds: {', '.join(BASELINE_KINDS)}"
        )
    model = builders[kind](cfg)
    model.kind = kind
    return model
