"""Frozen feature extractors and the perceptual reconstruction loss.

Two extractor families are provided. ``TinyFeatureExtractor`` is a small
fixed-weight convolutional stack, deterministic given its seed, that works
offline and is the default at desk scale. ``VggFeatureExtractor`` wraps an
ImageNet-pretrained torchvision backbone for full-scale experiments and
requires its weights to be present in the local cache.

Both expose per-layer feature taps (used by the perceptual loss) and a
pooled embedding vector (used by feature-distribution metrics), plus an
identity hash so that results computed with different extractors are never
compared silently.
"""

from __future__ import annotations

import os

import torch
import torch.nn.functional as F
from torch import nn

from morphaeus.errors import ExtractorUnavailableError
from morphaeus.utils import sha256_of_bytes

CACHE_ENV_VAR = "MORPHAEUS_EXTRACTOR_CACHE"


class FeatureExtractor(nn.Module):
    """Frozen network exposing tap-layer features and a pooled embedding."""

    name: str = "base"

    def __init__(self):
        super().__init__()
        self._hash: str | None = None

    def freeze(self) -> None:
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True):  # noqa: D102 - extractors stay frozen
        return super().train(False)

    @property
    def identity_hash(self) -> str:
        if self._hash is None:
            blobs = [self.name.encode()]
            for key, p in sorted(self.state_dict().items()):
                blobs.append(key.encode())
                blobs.append(p.detach().cpu().numpy().astype("float32").tobytes())
            self._hash = sha256_of_bytes(b"".join(blobs))[:16]
        return self._hash

    def adapt(self, x: torch.Tensor) -> torch.Tensor:
        """Map an image batch onto the extractor's expected input."""
        return x

    def features(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Tap-layer feature maps, shallowest first. Differentiable in x."""
        raise NotImplementedError

    def pooled(self, x: torch.Tensor) -> torch.Tensor:
        """(N, D) embedding from the deepest tap, globally average-pooled."""
        return self.features(x)[-1].mean(dim=(2, 3))

    @property
    def embedding_dim(self) -> int:
        raise NotImplementedError


class TinyFeatureExtractor(FeatureExtractor):
    """Four fixed random conv blocks with zero-mean first-layer kernels.

    The zero-mean kernels make the first layer blind to constant intensity
    offsets, so the features respond to structure (edges, texture) rather
    than global brightness. Weights are drawn from a private generator and
    unit-normalized per output channel; the extractor is identical across
    processes and platforms for a given seed.
    """

    name = "tiny"

    def __init__(self, in_channels: int = 1, widths: tuple[int, ...] = (16, 32, 64, 32), seed: int = 24036):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        convs = []
        prev = in_channels
        for i, width in enumerate(widths):
            conv = nn.Conv2d(prev, width, kernel_size=3, padding=1, bias=False)
            w = torch.randn(conv.weight.shape, generator=gen)
            if i == 0:
                w = w - w.mean(dim=(1, 2, 3), keepdim=True)
            w = w / w.flatten(1).norm(dim=1)[:, None, None, None]
            with torch.no_grad():
                conv.weight.copy_(w)
            convs.append(conv)
            prev = width
        self.convs = nn.ModuleList(convs)
        self.freeze()

    def features(self, x: torch.Tensor) -> list[torch.Tensor]:
        taps = []
        h = x
        for i, conv in enumerate(self.convs):
            h = F.leaky_relu(conv(h), 0.2)
            taps.append(h)
            if i < len(self.convs) - 1:
                h = F.avg_pool2d(h, 2)
        return taps

    @property
    def embedding_dim(self) -> int:
        return self.convs[-1].out_channels


_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class VggFeatureExtractor(FeatureExtractor):
    """ImageNet-pretrained VGG16 with early/mid taps and a deep pooled tap.

    Grayscale inputs are replicated to three channels and resized to the
    backbone's native 224x224 input. Weights must already be cached (see
    ``MORPHAEUS_EXTRACTOR_CACHE``); nothing is downloaded implicitly when
    the network is unreachable.
    """

    name = "vgg16"
    # Indices into vgg16.features after which to tap (relu1_2, relu2_2,
    # relu3_3 for the perceptual loss; relu5_3 feeds the pooled embedding).
    tap_indices = (3, 8, 15, 29)

    def __init__(self):
        super().__init__()
        cache = os.environ.get(CACHE_ENV_VAR)
        if cache:
            torch.hub.set_dir(cache)
        try:
            from torchvision.models import VGG16_Weights, vgg16
        except ImportError as exc:
            raise ExtractorUnavailableError(
                "torchvision is required for the vgg16 extractor; install the "
                "'pretrained' extra (pip install morphaeus[pretrained])"
            ) from exc
        try:
            backbone = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features
        except Exception as exc:
            hub_dir = torch.hub.get_dir()
            raise ExtractorUnavailableError(
                "could not load pretrained vgg16 weights. Download "
                "'vgg16-397923af.pth' from the torchvision model zoo on a "
                f"machine with network access, place it under {hub_dir}/checkpoints/, "
                f"or point {CACHE_ENV_VAR} at a directory that contains "
                "checkpoints/vgg16-397923af.pth (the filename suffix is the "
                "expected checksum and is verified on load)"
            ) from exc
        self.backbone = backbone[: self.tap_indices[-1] + 1]
        self.freeze()

    def adapt(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] == 1:
            x = x.repeat(1, 3, 1, 1)
        if x.shape[2:] != (224, 224):
            x = F.interpolate(x, size=(224, 224), mode="bilinear", align_corners=False)
        mean = x.new_tensor(_IMAGENET_MEAN)[None, :, None, None]
        std = x.new_tensor(_IMAGENET_STD)[None, :, None, None]
        return (x - mean) / std

    def features(self, x: torch.Tensor) -> list[torch.Tensor]:
        h = self.adapt(x)
        taps = []
        for i, layer in enumerate(self.backbone):
            h = layer(h)
            if i in self.tap_indices:
                taps.append(h)
        return taps

    @property
    def embedding_dim(self) -> int:
        return 512


def build_extractor(name: str, **kwargs) -> FeatureExtractor:
    """Construct a feature extractor by configuration name."""
    if name == "tiny":
        return TinyFeatureExtractor(**kwargs)
    if name == "vgg16":
        return VggFeatureExtractor(**kwargs)
    raise ExtractorUnavailableError(f"unknown extractor {name!r}; choose 'tiny' or 'vgg16'")


def perceptual(x: torch.Tensor, y: torch.Tensor, extractor: FeatureExtractor) -> torch.Tensor:
    """Mean squared distance between tap-layer features of x and y.

    Summed over tap layers; 0 when the inputs are identical. Differentiable
    through the (frozen) extractor in both arguments.
    """
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    fx = extractor.features(x)
    fy = extractor.features(y)
    total = x.new_zeros(())
    for a, b in zip(fx, fy):
        total = total + F.mse_loss(a, b)
    return total
