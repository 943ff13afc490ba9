"""Shared convolutional building blocks (3x3 kernels, batch norm, swish)."""

from __future__ import annotations

import math

import torch
from torch import nn

from morphaeus.errors import ConfigurationError


def conv_block(in_ch: int, out_ch: int, pool: bool = False) -> nn.Sequential:
    layers: list[nn.Module] = [
        nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1),
        nn.BatchNorm2d(out_ch),
        nn.SiLU(),
    ]
    if pool:
        layers.append(nn.MaxPool2d(2))
    return nn.Sequential(*layers)


def up_block(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
        nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1),
        nn.BatchNorm2d(out_ch),
        nn.SiLU(),
    )


def tconv_block(in_ch: int, out_ch: int) -> nn.Sequential:
    """Transposed-conv upsampling block used by the deformation head."""
    return nn.Sequential(
        nn.ConvTranspose2d(in_ch, out_ch, kernel_size=3, stride=2, padding=1, output_padding=1),
        nn.BatchNorm2d(out_ch),
        nn.SiLU(),
    )


def stages_for_resolution(resolution: int) -> int:
    """Number of halvings needed to reach 1x1 from a square resolution."""
    if resolution < 16 or resolution & (resolution - 1) != 0:
        raise ConfigurationError(
            f"resolution must be a power of two >= 16, got {resolution}"
        )
    return int(math.log2(resolution))


DEFAULT_FILTER_LADDER = (16, 32, 64, 128, 256, 256, 256, 256, 256, 256)


def default_filters(resolution: int) -> tuple[int, ...]:
    """Encoder widths per stage; one entry per halving of the resolution."""
    return DEFAULT_FILTER_LADDER[: stages_for_resolution(resolution)]
