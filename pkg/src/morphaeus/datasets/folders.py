"""Loading class-per-subdirectory image trees.

Expected layout: ``<root>/<ClassName>/*.png`` (jpg/jpeg/bmp also accepted).
Images are converted to grayscale by the standard luma transform, resized
with bilinear interpolation to the requested square resolution, and scaled
to [0, 1].
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from morphaeus.datasets.split import DatasetSplit, Sample, assign_split
from morphaeus.errors import ConfigurationError
from morphaeus.utils import derive_seed

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


def _read_image(path: Path, resolution: int) -> np.ndarray:
    with Image.open(path) as img:
        gray = img.convert("L").resize((resolution, resolution), Image.BILINEAR)
    arr = np.asarray(gray, dtype=np.float32) / 255.0
    return arr[None]


def _class_files(root: Path, class_name: str) -> list[Path]:
    return sorted(
        p
        for p in (root / class_name).iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def load_image_folder(root: str | Path, resolution: int, seed: int) -> DatasetSplit:
    """Load every class subdirectory and split each class 80/10/10.

    Unreadable files are skipped with a warning and counted per class in
    the split's ``skipped`` map. The result is a pure function of the file
    set, resolution and seed.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigurationError(f"dataset root {root} does not exist")
    class_names = sorted(p.name for p in root.iterdir() if p.is_dir() and p.name != "masks")
    if not class_names:
        raise ConfigurationError(f"dataset root {root} has no class subdirectories")

    samples_by_class: dict[str, list[Sample]] = {}
    skipped: dict[str, int] = {}
    for class_name in class_names:
        samples = []
        for path in _class_files(root, class_name):
            try:
                image = _read_image(path, resolution)
            except Exception as exc:
                log.warning("skipping unreadable image %s: %s", path, exc)
                skipped[class_name] = skipped.get(class_name, 0) + 1
                continue
            rel = str(path.relative_to(root))
            samples.append(Sample(id=rel, label=class_name, image=image, path=rel))
        if samples:
            samples_by_class[class_name] = samples
    if not samples_by_class:
        raise ConfigurationError(f"dataset root {root} contains no readable images")

    split = assign_split(samples_by_class, resolution=resolution, seed=seed)
    split.skipped = skipped
    return split


def sample_ood(
    root: str | Path, class_name: str, n: int, seed: int, resolution: int
) -> list[np.ndarray]:
    """Draw n distinct images of one class, normalized like training data.

    Selection is a deterministic function of (file set, seed). Intensity
    handling matches ``load_image_folder`` exactly (same grayscale
    conversion, same [0, 1] scaling, no histogram matching), so genuine
    intensity-range differences between domains are preserved.
    """
    root = Path(root)
    if not (root / class_name).is_dir():
        raise ConfigurationError(f"class {class_name!r} not found under {root}")
    files = _class_files(root, class_name)
    if n > len(files):
        raise ConfigurationError(
            f"requested {n} samples of class {class_name!r} but only "
            f"{len(files)} are available (short by {n - len(files)})"
        )
    if n < 0:
        raise ConfigurationError(f"sample count must be nonnegative, got {n}")
    rng = np.random.default_rng(derive_seed(seed, "ood", class_name))
    chosen = rng.choice(len(files), size=n, replace=False)
    return [_read_image(files[i], resolution) for i in sorted(chosen)]
