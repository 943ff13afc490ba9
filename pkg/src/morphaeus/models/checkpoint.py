"""Versioned model checkpoints with config echo and RNG capture."""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from morphaeus.errors import ConfigurationError
from morphaeus.models.baselines import BaselineConfig, build_baseline
from morphaeus.models.deformable import MorphAEusConfig, build_morphaeus

SCHEMA = 1


@dataclass
class Checkpoint:
    kind: str
    config: MorphAEusConfig | BaselineConfig
    state_dict: dict
    epoch: int
    extra: dict = field(default_factory=dict)
    rng: dict | None = None


def _capture_rng() -> dict:
    return {
        "torch": torch.get_rng_state(),
        "numpy": np.random.get_state(),
        "python": random.getstate(),
    }


def restore_rng(rng: dict) -> None:
    torch.set_rng_state(rng["torch"])
    np.random.set_state(rng["numpy"])
    random.setstate(rng["python"])


def save_checkpoint(path: str | Path, model: torch.nn.Module, epoch: int,
                    extra: dict | None = None) -> Path:
    """Write a self-describing checkpoint; the model must carry cfg/kind."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kind = getattr(model, "kind", None)
    if kind is None:
        raise ConfigurationError(
            "model does not declare its kind; set model.kind before checkpointing"
        )
    payload = {
        "schema": SCHEMA,
        "kind": kind,
        "config_class": type(model.cfg).__name__,
        "config": asdict(model.cfg),
        "state_dict": {k: v.cpu() for k, v in model.state_dict().items()},
        "epoch": epoch,
        "extra": dict(extra or {}),
        "rng": _capture_rng(),
    }
    torch.save(payload, path)
    return path


_CONFIG_CLASSES = {
    "MorphAEusConfig": MorphAEusConfig,
    "BaselineConfig": BaselineConfig,
}


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint saved by this package (trusted local file)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    schema = payload.get("schema")
    if schema != SCHEMA:
        raise ConfigurationError(
            f"checkpoint {path} has schema {schema!r}; this build reads schema {SCHEMA}"
        )
    cls = _CONFIG_CLASSES.get(payload["config_class"])
    if cls is None:
        raise ConfigurationError(
            f"checkpoint {path} references unknown config class {payload['config_class']!r}"
        )
    raw = payload["config"]
    if raw.get("encoder_filters") is not None:
        raw = {**raw, "encoder_filters": tuple(raw["encoder_filters"])}
    return Checkpoint(
        kind=payload["kind"],
        config=cls(**raw),
        state_dict=payload["state_dict"],
        epoch=payload["epoch"],
        extra=payload.get("extra", {}),
        rng=payload.get("rng"),
    )


def rebuild_model(ckpt: Checkpoint) -> torch.nn.Module:
    """Instantiate the architecture a checkpoint describes and load weights."""
    if ckpt.kind == "morphaeus":
        model = build_morphaeus(ckpt.config)
        model.kind = "morphaeus"
    else:
        model = build_baseline(ckpt.kind, ckpt.config)
    model.load_state_dict(ckpt.state_dict)
    model.eval()
    return model
