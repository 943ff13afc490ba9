"""Command-line entry point.

Every subcommand is config-file-first: a YAML file names the job and
repeated ``key=value`` arguments override single fields, so a run can be
archived and replayed from its config. Logs go to stderr; stdout carries
machine-readable ``key=value`` lines and training progress.

Exit codes: 0 on success, 1 on configuration errors, 2 on runtime
failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from morphaeus.datasets import generate_shape_dataset, load_image_folder
from morphaeus.datasets.synthetic import SyntheticSpec
from morphaeus.errors import ConfigurationError, MorphaeusError
from morphaeus.experiments import (
    describe_plan,
    load_config,
    load_report,
    reconstruct,
    residual_scores,
    resolve_dataset,
    resolve_model_config,
    resolve_train_config,
    run_experiment,
    save_image,
)
from morphaeus.experiments.config import (
    MODEL_KINDS,
    _reject_unknown,
    apply_overrides,
    validate_model_overrides,
    validate_train_overrides,
)
from morphaeus.experiments.runner import _build_model, _pick_train_class
from morphaeus.losses import build_extractor
from morphaeus.metrics import (
    SCORE_MODES,
    ScoreSet,
    auroc,
    perceptual_distance,
    residual_heatmap,
    ssim,
)
from morphaeus.models import load_checkpoint, pseudo_healthy, rebuild_model
from morphaeus.training import train
from morphaeus.utils import derive_seed, to_tensor

log = logging.getLogger(__name__)


# ------------------------------------------------------------ job configs


@dataclass
class TrainJob:
    """A single-model training run parsed from a YAML job file."""

    output_dir: str
    model: str = "morphaeus"
    seed: int = 0
    resolution: int = 64
    data_root: str | None = None
    synthetic: dict | None = None
    synthetic_shapes: dict | None = None
    train_class: str | None = None
    train: dict = field(default_factory=dict)
    model_config: dict = field(default_factory=dict)

    def synthetic_spec(self) -> SyntheticSpec:
        return _spec_from(self)


@dataclass
class EvaluateJob:
    """Scoring of a dataset against one saved checkpoint."""

    checkpoint: str
    output_dir: str
    seed: int = 0
    resolution: int = 64
    data_root: str | None = None
    synthetic: dict | None = None
    synthetic_shapes: dict | None = None
    train_class: str | None = None
    score_mode: str = "mean-abs"
    extractor: str = "tiny"

    def synthetic_spec(self) -> SyntheticSpec:
        return _spec_from(self)


def _spec_from(job) -> SyntheticSpec:
    spec = dict(job.synthetic or {})
    spec.setdefault("resolution", job.resolution)
    spec.setdefault("seed", job.seed)
    try:
        return SyntheticSpec(**spec)
    except TypeError as e:
        raise ConfigurationError(f"bad synthetic spec: {e}") from None


def _check_dataset_source(job, name: str) -> None:
    sources = [s for s in (job.data_root, job.synthetic, job.synthetic_shapes)
               if s is not None]
    if len(sources) != 1:
        raise ConfigurationError(
            f"{name} needs exactly one dataset source "
            "(data_root, synthetic, or synthetic_shapes)"
        )
    if job.data_root is not None and not Path(job.data_root).is_dir():
        raise ConfigurationError(f"data_root {job.data_root} is not a directory")


def _load_job(path: str, overrides: list[str], cls, name: str):
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {p} does not exist")
    try:
        mapping = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"cannot parse {p}: {e}") from None
    apply_overrides(mapping, overrides)
    _reject_unknown(mapping, cls, name)
    try:
        job = cls(**mapping)
    except TypeError as e:
        raise ConfigurationError(f"bad {name}: {e}") from None
    return job


# ------------------------------------------------------------ subcommands


def cmd_prepare_data(args) -> int:
    split = load_image_folder(args.data_root, args.resolution, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    split.save_manifest(out)
    print(f"manifest={out}")
    print(f"manifest_hash={split.manifest_hash()}")
    for part in ("train", "val", "test"):
        print(f"{part}={len(split.part(part))}")
    print(f"classes={','.join(split.labels)}")
    return 0


def cmd_make_synthetic(args) -> int:
    classes = tuple(c.strip() for c in args.classes.split(",") if c.strip())
    root = generate_shape_dataset(
        args.out, n_per_class=args.n_per_class, resolution=args.resolution,
        seed=args.seed, classes=classes,
    )
    count = sum(1 for _ in Path(root).rglob("*.png"))
    print(f"root={root}")
    print(f"images={count}")
    return 0


def cmd_train(args) -> int:
    job = _load_job(args.config, args.overrides, TrainJob, "train job")
    if job.model not in MODEL_KINDS:
        raise ConfigurationError(
            f"unknown model kind {job.model!r}; choose one of {', '.join(MODEL_KINDS)}"
        )
    _check_dataset_source(job, "train job")
    validate_train_overrides(job.train)
    validate_model_overrides(job.model_config)
    mcfg = resolve_model_config(job.model, job.model_config, job.resolution)
    extra = {}
    if job.model == "morphaeus" and "deformation_start_epoch" not in job.train:
        extra["deformation_start_epoch"] = mcfg.deformation_start_epoch
    tcfg = resolve_train_config(job.model, job.train, job.seed, **extra)
    if args.dry_run:
        print(f"model={job.model}")
        print(f"seed={job.seed}")
        print(f"max_epochs={tcfg.max_epochs}")
        print(f"output={job.output_dir}")
        return 0
    out = Path(job.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    split, _ = resolve_dataset(job, out)
    train_class = _pick_train_class(job, split)
    in_split = split.filter_label(train_class)
    model = _build_model(job.model, mcfg, derive_seed(job.seed, "init", job.model))
    ckpt, history = train(model, in_split, tcfg, checkpoint_path=out / "checkpoint.pt")
    history.to_csv(out / "history.csv")
    provenance = dataclasses.asdict(job)
    provenance.update(
        train_class=train_class,
        manifest_hash=split.manifest_hash(),
        best_epoch=ckpt.extra["best_epoch"],
        val_loss=ckpt.extra["val_loss"],
    )
    (out / "job.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    print(f"checkpoint={out / 'checkpoint.pt'}")
    print(f"history={out / 'history.csv'}")
    print(f"best_epoch={ckpt.extra['best_epoch']}")
    print(f"val_loss={ckpt.extra['val_loss']!r}")
    return 0


def cmd_evaluate(args) -> int:
    job = _load_job(args.config, args.overrides, EvaluateJob, "evaluate job")
    if job.score_mode not in SCORE_MODES:
        raise ConfigurationError(
            f"unknown score mode {job.score_mode!r}; choose one of {', '.join(SCORE_MODES)}"
        )
    _check_dataset_source(job, "evaluate job")
    if not Path(job.checkpoint).is_file():
        raise ConfigurationError(f"checkpoint {job.checkpoint} does not exist")
    if args.dry_run:
        print(f"checkpoint={job.checkpoint}")
        print(f"score_mode={job.score_mode}")
        print(f"output={job.output_dir}")
        return 0
    ckpt = load_checkpoint(job.checkpoint)
    if ckpt.config.resolution != job.resolution:
        raise ConfigurationError(
            f"checkpoint was trained at resolution {ckpt.config.resolution}, "
            f"job asks for {job.resolution}"
        )
    model = rebuild_model(ckpt)
    out = Path(job.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    split, _ = resolve_dataset(job, out)
    train_class = _pick_train_class(job, split)
    extractor = build_extractor(job.extractor, in_channels=ckpt.config.in_channels)
    in_test, _ = split.filter_label(train_class).stack("test")
    if len(in_test) == 0:
        raise ConfigurationError(f"class {train_class!r} has no test samples")
    recon = reconstruct(model, in_test)
    result = {
        "checkpoint": str(job.checkpoint),
        "kind": ckpt.kind,
        "train_class": train_class,
        "score_mode": job.score_mode,
        "manifest_hash": split.manifest_hash(),
        "ssim": ssim(in_test, recon),
        "perceptual_distance": perceptual_distance(in_test, recon, extractor),
        "scores": {},
        "auroc": {},
    }
    normal_scores = residual_scores(model, in_test, job.score_mode)
    result["scores"][train_class] = [float(v) for v in normal_scores]
    for label in split.labels:
        if label == train_class:
            continue
        images, _ = split.filter_label(label).stack("test")
        if len(images) == 0:
            continue
        scores = residual_scores(model, images, job.score_mode)
        result["scores"][label] = [float(v) for v in scores]
        result["auroc"][label] = auroc(ScoreSet.from_groups(normal_scores, scores))
    path = out / "evaluation.json"
    path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"evaluation={path}")
    print(f"ssim={result['ssim']!r}")
    for label, value in sorted(result["auroc"].items()):
        print(f"auroc_{label}={value!r}")
    return 0


def cmd_run_experiment(args) -> int:
    cfg = load_config(args.config, args.overrides)
    if args.dry_run:
        print(describe_plan(cfg))
        return 0
    report = run_experiment(cfg)
    print(f"report={cfg.experiment_dir() / 'report.json'}")
    print(f"rows={len(report.rows)}")
    failed = [str(r.get("model", r.get("variant", r.get("depth")))) for r in report.rows
              if r.get("failed")]
    if failed:
        print(f"failed={','.join(failed)}")
    return 0


def cmd_synthesize(args) -> int:
    if not Path(args.checkpoint).is_file():
        raise ConfigurationError(f"checkpoint {args.checkpoint} does not exist")
    if not Path(args.input).is_file():
        raise ConfigurationError(f"input image {args.input} does not exist")
    ckpt = load_checkpoint(args.checkpoint)
    model = rebuild_model(ckpt)
    res = ckpt.config.resolution
    with Image.open(args.input) as im:
        gray = im.convert("L").resize((res, res), Image.BILINEAR)
    x = np.asarray(gray, dtype=np.float32)[None, None] / 255.0
    recon = pseudo_healthy(model, to_tensor(x)).numpy()
    out = Path(args.out)
    stem = Path(args.input).stem
    healthy_path = save_image(recon[0, 0], out / f"{stem}_pseudo_healthy.png")
    heatmap_path = out / f"{stem}_heatmap.png"
    residual_heatmap(x[0, 0], recon[0, 0], heatmap_path)
    print(f"pseudo_healthy={healthy_path}")
    print(f"heatmap={heatmap_path}")
    return 0


def cmd_report(args) -> int:
    report = load_report(args.experiment_dir)
    sys.stdout.write(report.to_csv_text())
    return 0


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphaeus",
        description="Train and evaluate reconstruction-based anomaly detectors.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="index an image folder into a split manifest")
    p.add_argument("--data-root", required=True)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="manifest JSON path")
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("make-synthetic", help="write a shape-class image folder")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=120)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", default="circles,squares,crosses")
    p.set_defaults(func=cmd_make_synthetic)

    for name, func, job_help in (
        ("train", cmd_train, "train one model from a job config"),
        ("evaluate", cmd_evaluate, "score a dataset against a checkpoint"),
        ("run-experiment", cmd_run_experiment, "run a full experiment config"),
    ):
        p = sub.add_parser(name, help=job_help)
        p.add_argument("--config", required=True)
        p.add_argument("--dry-run", action="store_true",
                       help="validate and print the plan without writing")
        p.add_argument("overrides", nargs="*", metavar="key=value")
        p.set_defaults(func=func)

    p = sub.add_parser("synthesize", help="pseudo-healthy PNG + heatmap for one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("report", help="print a saved experiment report as CSV")
    p.add_argument("--experiment-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigurationError as e:
        log.error("%s", e)
        return 1
    except MorphaeusError as e:
        log.error("%s", e)
        return 2
    except Exception:
        log.exception("unexpected failure")
        return 2


if __name__ == "__main__":
    sys.exit(main())
