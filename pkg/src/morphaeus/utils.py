"""Small shared helpers: seeding, hashing, array/tensor conversion."""

from __future__ import annotations

import hashlib
import json
import random
import zlib

import numpy as np
import torch


def seed_everything(seed: int) -> None:
    """Seed python, numpy's legacy generator and torch from one integer."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def derive_seed(seed: int, *tags: str | int) -> int:
    """Derive a stable sub-seed from a base seed and a sequence of tags.

    Uses crc32 so the derivation is identical across platforms and runs.
    """
    h = zlib.crc32(str(seed).encode())
    for tag in tags:
        h = zlib.crc32(str(tag).encode(), h)
    return h & 0x7FFFFFFF


def sha256_of_json(obj) -> str:
    """Canonical sha256 of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def sha256_of_bytes(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def to_tensor(batch: np.ndarray | torch.Tensor, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Convert an image batch to a rank-4 float tensor (N, C, H, W)."""
    if isinstance(batch, torch.Tensor):
        t = batch
    else:
        t = torch.from_numpy(np.ascontiguousarray(batch))
    if t.ndim == 2:
        t = t[None, None]
    elif t.ndim == 3:
        t = t[None]
    if t.ndim != 4:
        raise ValueError(f"expected an image batch of rank 2..4, got shape {tuple(t.shape)}")
    return t.to(dtype)


def to_numpy(batch: torch.Tensor | np.ndarray) -> np.ndarray:
    if isinstance(batch, torch.Tensor):
        return batch.detach().cpu().numpy()
    return np.asarray(batch)
