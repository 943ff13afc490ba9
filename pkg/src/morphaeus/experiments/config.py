"""Experiment configuration: file loading, overrides, fail-fast checks."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from morphaeus.datasets import NoiseSpec, SyntheticSpec
from morphaeus.errors import ConfigurationError
from morphaeus.models import BASELINE_KINDS
from morphaeus.models.baselines import BaselineConfig
from morphaeus.models.deformable import MorphAEusConfig
from morphaeus.training import TrainConfig
from morphaeus.utils import sha256_of_json

EXPERIMENT_KINDS = ("ood", "pathology", "ablation", "depth-sweep", "tails")
MODEL_KINDS = ("morphaeus", *BASELINE_KINDS)


@dataclass
class ExperimentConfig:
    """One experiment run, fully determined by this record plus the code.

    ``data_root`` points at a class-per-directory image folder;
    ``synthetic`` (blob phantoms) or ``synthetic_shapes`` (shape classes)
    generate data instead. ``train`` and ``model`` hold free-form override
    mappings validated against the training recipe and model configs.
    """

    kind: str
    output_dir: str
    seed: int = 0
    seeds: int = 1
    resolution: int = 64
    data_root: str | None = None
    synthetic: dict | None = None
    synthetic_shapes: dict | None = None
    models: tuple[str, ...] = ("morphaeus",)
    train_class: str | None = None
    ood_classes: tuple[str, ...] = ()
    score_mode: str = "mean-abs"
    extractor: str = "tiny"
    depths: tuple[int, ...] = (1, 2, 3, 4)
    heatmap_k: int = 8
    overlap_bins: int = 64
    train: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        self.models = tuple(self.models)
        self.ood_classes = tuple(self.ood_classes)
        self.depths = tuple(self.depths)

    def experiment_dir(self) -> Path:
        return Path(self.output_dir) / self.kind

    def config_hash(self) -> str:
        record = {
            f.name: getattr(self, f.name) for f in fields(self)
            if f.name != "output_dir"  # location does not change the science
        }
        for key in ("models", "ood_classes", "depths"):
            record[key] = list(record[key])
        return sha256_of_json(record)

    def synthetic_spec(self) -> SyntheticSpec:
        if self.synthetic is None:
            raise ConfigurationError(f"experiment {self.kind!r} has no synthetic spec")
        spec = dict(self.synthetic)
        spec.setdefault("resolution", self.resolution)
        spec.setdefault("seed", self.seed)
        try:
            return SyntheticSpec(**spec)
        except TypeError as e:
            raise ConfigurationError(f"bad synthetic spec: {e}") from None


def _reject_unknown(mapping: dict, cls, where: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ConfigurationError(
            f"unknown {where} key(s): {', '.join(unknown)}; "
            f"known keys: {', '.join(sorted(known))}"
        )


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build and sanity-check a config from a parsed mapping."""
    if not isinstance(mapping, dict):
        raise ConfigurationError(f"config must be a mapping, got {type(mapping).__name__}")
    _reject_unknown(mapping, ExperimentConfig, "config")
    try:
        cfg = ExperimentConfig(**mapping)
    except TypeError as e:
        raise ConfigurationError(f"bad config: {e}") from None
    validate_config(cfg)
    return cfg


def load_config(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse a YAML config file, then apply ``key=value`` overrides."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        mapping = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigurationError(f"cannot parse {path}: {e}") from None
    if mapping is None:
        mapping = {}
    apply_overrides(mapping, overrides or [])
    return config_from_mapping(mapping)


def apply_overrides(mapping: dict, overrides: list[str]) -> dict:
    """Set dotted ``key=value`` pairs onto a parsed config mapping.

    Values go through the YAML scalar parser, so ``seed=5`` is an int and
    ``models=[morphaeus,vae]`` a list. Overrides land after file parsing
    and win over file values.
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(
                f"override {item!r} is not of the form key=value"
            )
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        if not all(keys):
            raise ConfigurationError(f"override {item!r} has an empty key segment")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        node = mapping
        for key in keys[:-1]:
            nxt = node.get(key)
            if not isinstance(nxt, dict):
                nxt = {}
                node[key] = nxt
            node = nxt
        node[keys[-1]] = value
    return mapping


def validate_config(cfg: ExperimentConfig) -> None:
    """Check everything resolvable before any training starts."""
    if cfg.kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(
            f"unknown experiment kind {cfg.kind!r}; expected one of {EXPERIMENT_KINDS}"
        )
    for kind in cfg.models:
        if kind not in MODEL_KINDS:
            raise ConfigurationError(
                f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}"
            )
    if cfg.seeds < 1:
        raise ConfigurationError(f"seeds must be at least 1, got {cfg.seeds}")
    if cfg.score_mode not in ("mean-abs", "max-abs", "p95-abs"):
        raise ConfigurationError(f"unknown score mode {cfg.score_mode!r}")
    if cfg.extractor not in ("tiny", "vgg16"):
        raise ConfigurationError(f"unknown extractor {cfg.extractor!r}")
    sources = [s for s in (cfg.data_root, cfg.synthetic, cfg.synthetic_shapes)
               if s is not None]
    if cfg.kind != "tails":
        if len(sources) == 0:
            raise ConfigurationError(
                "no dataset configured: set data_root, synthetic or synthetic_shapes"
            )
        if len(sources) > 1:
            raise ConfigurationError("configure exactly one dataset source")
    if cfg.data_root is not None and not Path(cfg.data_root).is_dir():
        raise ConfigurationError(f"data_root {cfg.data_root} is not a directory")
    if cfg.synthetic is not None:
        cfg.synthetic_spec()
    if cfg.kind == "ood" and not cfg.ood_classes and cfg.synthetic_shapes is None:
        raise ConfigurationError("ood experiment needs ood_classes")
    if cfg.kind == "depth-sweep":
        if not cfg.depths:
            raise ConfigurationError("depth sweep needs at least one depth")
        if any(d < 1 for d in cfg.depths):
            raise ConfigurationError(f"depths must be positive, got {cfg.depths}")
    if cfg.heatmap_k < 1:
        raise ConfigurationError(f"heatmap_k must be positive, got {cfg.heatmap_k}")
    if cfg.overlap_bins < 2:
        raise ConfigurationError(f"overlap_bins must be at least 2, got {cfg.overlap_bins}")
    validate_train_overrides(cfg.train)
    validate_model_overrides(cfg.model)


def validate_train_overrides(overrides: dict) -> None:
    allowed = {f.name for f in fields(TrainConfig)} - {"seed"}
    unknown = sorted(set(overrides) - allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown train override(s): {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def validate_model_overrides(overrides: dict) -> None:
    allowed = {f.name for f in fields(MorphAEusConfig)} | {
        f.name for f in fields(BaselineConfig)
    }
    allowed -= {"resolution"}  # set from the experiment, not overridable per model
    unknown = sorted(set(overrides) - allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown model override(s): {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def resolve_train_config(kind: str, overrides: dict, seed: int, **extra) -> TrainConfig:
    """Recipe for the model kind, plus the given overrides, plus a seed."""
    from morphaeus.training import recipe

    overrides = dict(overrides)
    noise = overrides.get("noise")
    if isinstance(noise, dict):
        try:
            overrides["noise"] = NoiseSpec(**noise)
        except TypeError as e:
            raise ConfigurationError(f"bad noise spec: {e}") from None
    overrides.update(extra)
    recipe_kind = "morphaeus" if kind.startswith("morphaeus") else kind
    return recipe(recipe_kind, seed=seed, **overrides)


def resolve_model_config(kind: str, overrides: dict, resolution: int):
    """Model hyper-table for one kind, filtered to the fields it knows."""
    cls = MorphAEusConfig if kind == "morphaeus" else BaselineConfig
    known = {f.name for f in fields(cls)}
    picked = {k: v for k, v in overrides.items() if k in known}
    if "encoder_filters" in picked and picked["encoder_filters"] is not None:
        picked["encoder_filters"] = tuple(picked["encoder_filters"])
    try:
        return cls(resolution=resolution, **picked)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"bad model config for {kind!r}: {e}") from None
