"""Synthetic desk-scale datasets.

Two generators live here. ``make_synthetic`` builds lung-like scenes (a
bright torso shell around two dark ellipses) with optional bright blob
anomalies and pixel-exact masks; it exercises the full anomaly pipeline
in minutes. ``generate_shape_dataset`` writes a small class-per-folder
PNG tree (circles / squares / crosses) standing in for a multi-class
image corpus, used for out-of-distribution protocols and loader tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from morphaeus.datasets.split import DatasetSplit, Sample, assign_split
from morphaeus.errors import ConfigurationError
from morphaeus.utils import derive_seed

MIN_RESOLUTION = 16


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for the lung-like synthetic dataset.

    ``blob_radius_range`` is in pixels; when omitted it scales with the
    resolution (6% to 12% of the side). ``intensity_delta`` is the
    brightness added inside the anomaly mask.
    """

    n_normal: int = 200
    n_anomalous: int = 50
    resolution: int = 64
    blob_radius_range: tuple[float, float] | None = None
    intensity_delta: float = 0.5
    seed: int = 0

    def radius_range(self) -> tuple[float, float]:
        if self.blob_radius_range is not None:
            return self.blob_radius_range
        return (0.06 * self.resolution, 0.12 * self.resolution)


def _smooth_field(rng: np.random.Generator, res: int, coarseness: int = 8) -> np.ndarray:
    """Standardized smooth noise in roughly [-3, 3], shape (res, res)."""
    side = max(2, res // coarseness)
    coarse = rng.standard_normal((1, 1, side, side)).astype(np.float32)
    field = F.interpolate(
        torch.from_numpy(coarse), size=(res, res), mode="bilinear", align_corners=False
    ).numpy()[0, 0]
    return (field - field.mean()) / max(field.std(), 1e-8)


def _ellipse_mask(res: int, cx: float, cy: float, ax: float, ay: float) -> np.ndarray:
    yy, xx = np.mgrid[0:res, 0:res].astype(np.float32)
    return ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 <= 1.0


def _scene(rng: np.random.Generator, res: int) -> tuple[np.ndarray, list[tuple]]:
    """One normal scene plus the two lung ellipses (for blob placement).

    Anatomy jitters strongly between scenes on purpose: a rigid global
    prior cannot match every individual's boundaries, which is the failure
    mode the deformation pathway exists to fix.
    """
    img = 0.06 + 0.02 * _smooth_field(rng, res)
    jitter = lambda v, frac: v * rng.uniform(1 - frac, 1 + frac)  # noqa: E731
    cx = res * rng.uniform(0.44, 0.56)
    cy = res * rng.uniform(0.46, 0.58)
    torso = _ellipse_mask(res, cx, cy, jitter(0.38 * res, 0.12), jitter(0.42 * res, 0.12))
    img[torso] = 0.20 + 0.02 * _smooth_field(rng, res)[torso]
    lungs = []
    for side in (-1.0, 1.0):
        lx = cx + side * 0.17 * res * rng.uniform(0.85, 1.15)
        ly = cy - 0.02 * res
        ax = jitter(0.13 * res, 0.18)
        ay = jitter(0.26 * res, 0.18)
        mask = _ellipse_mask(res, lx, ly, ax, ay)
        img[mask] = 0.10 + 0.02 * _smooth_field(rng, res)[mask]
        lungs.append((lx, ly, ax, ay))
    return np.clip(img, 0.0, 1.0).astype(np.float32), lungs


def synthesize_pair(spec: SyntheticSpec, index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic (normal, anomalous counterpart, mask) triple.

    The anomalous image equals the normal one everywhere outside the
    boolean mask; inside, ``intensity_delta`` is added and clipped.
    """
    rng = np.random.default_rng(derive_seed(spec.seed, "anomalous", index))
    normal, lungs = _scene(rng, spec.resolution)
    lx, ly, ax, ay = lungs[int(rng.integers(2))]
    bx = lx + rng.uniform(-0.4, 0.4) * ax
    by = ly + rng.uniform(-0.4, 0.4) * ay
    lo, hi = spec.radius_range()
    radius = rng.uniform(lo, hi)
    yy, xx = np.mgrid[0 : spec.resolution, 0 : spec.resolution].astype(np.float32)
    mask = (xx - bx) ** 2 + (yy - by) ** 2 <= radius**2
    anomalous = normal.copy()
    anomalous[mask] = np.clip(anomalous[mask] + spec.intensity_delta, 0.0, 1.0)
    return normal, anomalous, mask


def make_synthetic(spec: SyntheticSpec) -> tuple[DatasetSplit, dict[str, np.ndarray]]:
    """Generate the split plus a mask per anomalous sample id.

    Normal images are split 80/10/10; anomalous images all go to the test
    part under the label "anomaly".
    """
    if spec.resolution < MIN_RESOLUTION:
        raise ConfigurationError(
            f"resolution must be at least {MIN_RESOLUTION}, got {spec.resolution}"
        )
    if spec.n_normal < 0 or spec.n_anomalous < 0:
        raise ConfigurationError("sample counts must be nonnegative")
    if spec.intensity_delta < 0 or spec.intensity_delta > 1:
        raise ConfigurationError(
            f"intensity delta must lie in [0, 1], got {spec.intensity_delta}"
        )

    normals = []
    for i in range(spec.n_normal):
        rng = np.random.default_rng(derive_seed(spec.seed, "normal", i))
        image, _ = _scene(rng, spec.resolution)
        normals.append(Sample(id=f"normal/{i:04d}", label="normal", image=image[None]))
    split = assign_split({"normal": normals}, resolution=spec.resolution, seed=spec.seed)

    masks: dict[str, np.ndarray] = {}
    for i in range(spec.n_anomalous):
        _, anomalous, mask = synthesize_pair(spec, i)
        sid = f"anomaly/{i:04d}"
        split.test.append(Sample(id=sid, label="anomaly", image=anomalous[None]))
        masks[sid] = mask
    return split, masks


def _draw_shape(rng: np.random.Generator, res: int, kind: str) -> np.ndarray:
    img = 0.10 + 0.02 * _smooth_field(rng, res)
    cx = res * rng.uniform(0.4, 0.6)
    cy = res * rng.uniform(0.4, 0.6)
    size = res * rng.uniform(0.18, 0.30)
    value = rng.uniform(0.6, 0.9)
    yy, xx = np.mgrid[0:res, 0:res].astype(np.float32)
    if kind == "circles":
        d = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        cover = np.clip(size - d + 0.5, 0.0, 1.0)
    elif kind == "squares":
        d = np.maximum(np.abs(xx - cx), np.abs(yy - cy))
        cover = np.clip(size - d + 0.5, 0.0, 1.0)
    elif kind == "crosses":
        arm = size * 0.35
        horiz = np.maximum(np.abs(yy - cy) - arm, np.abs(xx - cx) - size)
        vert = np.maximum(np.abs(xx - cx) - arm, np.abs(yy - cy) - size)
        cover = np.clip(0.5 - np.minimum(horiz, vert), 0.0, 1.0)
    else:
        raise ConfigurationError(f"unknown shape class {kind!r}")
    img = img * (1 - cover) + value * cover
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def generate_shape_dataset(
    root: str | Path,
    n_per_class: int,
    resolution: int,
    seed: int,
    classes: tuple[str, ...] = ("circles", "squares", "crosses"),
) -> Path:
    """Write a class-per-folder PNG tree of simple bright shapes."""
    if resolution < MIN_RESOLUTION:
        raise ConfigurationError(
            f"resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )
    root = Path(root)
    for kind in classes:
        out_dir = root / kind
        out_dir.mkdir(parents=True, exist_ok=True)
        for i in range(n_per_class):
            rng = np.random.default_rng(derive_seed(seed, "shape", kind, i))
            img = _draw_shape(rng, resolution, kind)
            data = np.round(img * 255.0).astype(np.uint8)
            Image.fromarray(data, mode="L").save(out_dir / f"{i:04d}.png")
    return root
