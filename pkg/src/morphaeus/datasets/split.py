"""Deterministic train/val/test splitting and split manifests."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from morphaeus.utils import derive_seed, sha256_of_json


def split_counts(n: int) -> tuple[int, int, int]:
    """80/10/10 by count; val and test round down, the remainder trains."""
    n_val = n // 10
    n_test = n // 10
    return n - n_val - n_test, n_val, n_test


@dataclass(frozen=True)
class Sample:
    """One image with its class label.

    ``image`` is (1, H, W) float32 in [0, 1]. ``path`` is kept for
    provenance when the sample came from disk; synthetic samples carry
    only their id. Treat instances as immutable once constructed.
    """

    id: str
    label: str
    image: np.ndarray
    path: str | None = None


@dataclass
class DatasetSplit:
    """Train/val/test partitions at a fixed square resolution."""

    train: list[Sample]
    val: list[Sample]
    test: list[Sample]
    resolution: int
    seed: int
    skipped: dict[str, int] = field(default_factory=dict)

    PARTS = ("train", "val", "test")

    def part(self, name: str) -> list[Sample]:
        if name not in self.PARTS:
            raise ValueError(f"unknown split part {name!r}; expected one of {self.PARTS}")
        return getattr(self, name)

    def stack(self, name: str) -> tuple[np.ndarray, list[str]]:
        """Materialize one part as ((N, 1, H, W) float32, labels)."""
        samples = self.part(name)
        if not samples:
            r = self.resolution
            return np.zeros((0, 1, r, r), dtype=np.float32), []
        images = np.stack([s.image for s in samples]).astype(np.float32)
        return images, [s.label for s in samples]

    def filter_label(self, label: str) -> "DatasetSplit":
        return DatasetSplit(
            train=[s for s in self.train if s.label == label],
            val=[s for s in self.val if s.label == label],
            test=[s for s in self.test if s.label == label],
            resolution=self.resolution,
            seed=self.seed,
            skipped=dict(self.skipped),
        )

    @property
    def labels(self) -> list[str]:
        seen = []
        for part in self.PARTS:
            for s in self.part(part):
                if s.label not in seen:
                    seen.append(s.label)
        return sorted(seen)

    def manifest(self) -> dict:
        """JSON-ready record of the assignment, keyed by relative path/id."""
        out = {
            "resolution": self.resolution,
            "seed": self.seed,
            "skipped": dict(sorted(self.skipped.items())),
        }
        for part in self.PARTS:
            out[part] = [s.path if s.path is not None else s.id for s in self.part(part)]
        return out

    def manifest_hash(self) -> str:
        return sha256_of_json(self.manifest())

    def save_manifest(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))


def assign_split(
    samples_by_class: dict[str, list[Sample]], resolution: int, seed: int
) -> DatasetSplit:
    """Shuffle each class with a class-derived seed and cut 80/10/10."""
    train: list[Sample] = []
    val: list[Sample] = []
    test: list[Sample] = []
    for label in sorted(samples_by_class):
        samples = samples_by_class[label]
        rng = np.random.default_rng(derive_seed(seed, "split", label))
        order = rng.permutation(len(samples))
        n_train, n_val, _ = split_counts(len(samples))
        for rank, idx in enumerate(order):
            if rank < n_train:
                train.append(samples[idx])
            elif rank < n_train + n_val:
                val.append(samples[idx])
            else:
                test.append(samples[idx])
    return DatasetSplit(train=train, val=val, test=test, resolution=resolution, seed=seed)
