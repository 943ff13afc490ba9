"""Experiment pipelines: resolve data, train or resume, evaluate, report.

Every pipeline is deterministic given its config: datasets derive from the
config seed, replicate ``r`` trains with ``seed + r``, and evaluation is
pure. Existing checkpoints are reused, so re-running a finished config
only re-evaluates and rewrites identical reports.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

import numpy as np
import torch

from morphaeus.datasets import generate_shape_dataset, load_image_folder, make_synthetic
from morphaeus.datasets.split import DatasetSplit
from morphaeus.errors import ConfigurationError, MorphaeusError
from morphaeus.experiments.config import (
    ExperimentConfig,
    resolve_model_config,
    resolve_train_config,
)
from morphaeus.experiments.figures import density_plot, image_grid, save_image, score_overlap
from morphaeus.experiments.report import ExperimentReport, median_rows
from morphaeus.losses import build_extractor
from morphaeus.metrics import (
    DomainClassifier,
    ScoreSet,
    anomaly_score,
    auprc,
    auroc,
    feature_stats,
    fpr_at_tpr,
    manifold_test,
    perceptual_distance,
    residual_heatmap,
    ssim,
    train_domain_classifier,
)
from morphaeus.models import (
    build_baseline,
    build_morphaeus,
    load_checkpoint,
    pseudo_healthy,
    rebuild_model,
)
from morphaeus.training import train
from morphaeus.utils import derive_seed, seed_everything, to_tensor

log = logging.getLogger(__name__)

FID_SAMPLE_CAP = 1000

ABLATION_VARIANTS = (
    ("full", {}),
    ("without-warp", {"use_deformation": False}),
    ("without-warp-or-perceptual", {"use_deformation": False, "use_perceptual": False}),
)


# ---------------------------------------------------------------- datasets


def resolve_dataset(cfg, data_dir: Path) -> tuple[DatasetSplit, dict | None]:
    """Materialize the configured dataset; synthetic masks when available."""
    if cfg.data_root is not None:
        return load_image_folder(cfg.data_root, cfg.resolution, cfg.seed), None
    if cfg.synthetic_shapes is not None:
        params = dict(cfg.synthetic_shapes)
        root = data_dir / "data"
        n_per_class = int(params.pop("n_per_class", 120))
        classes = tuple(params.pop("classes", ("circles", "squares", "crosses")))
        if params:
            raise ConfigurationError(
                f"unknown synthetic_shapes key(s): {', '.join(sorted(params))}"
            )
        if not root.is_dir():
            generate_shape_dataset(
                root, n_per_class=n_per_class, resolution=cfg.resolution,
                seed=cfg.seed, classes=classes,
            )
        return load_image_folder(root, cfg.resolution, cfg.seed), None
    split, masks = make_synthetic(cfg.synthetic_spec())
    return split, masks


def _pick_train_class(cfg, split: DatasetSplit) -> str:
    labels = split.labels
    if cfg.train_class is None:
        # Default to a class that actually has training samples; test-only
        # classes (e.g. synthetic anomalies) cannot be trained on.
        trainable = sorted({s.label for s in split.train})
        if not trainable:
            raise ConfigurationError("dataset has no training samples")
        name = trainable[0]
        log.info("train_class not set; defaulting to %r", name)
    else:
        name = cfg.train_class
    if name not in labels:
        raise ConfigurationError(
            f"train class {name!r} not in dataset classes {labels}"
        )
    return name


# ------------------------------------------------------ training / resume


def _build_model(kind: str, mcfg, init_seed: int):
    seed_everything(init_seed)
    if kind == "morphaeus":
        return build_morphaeus(mcfg)
    return build_baseline(kind, mcfg)


def train_or_resume(
    kind: str,
    cfg: ExperimentConfig,
    split: DatasetSplit,
    model_dir: Path,
    rep: int,
    train_extra: dict | None = None,
    mcfg=None,
):
    """Return a trained model for one replicate, reusing its checkpoint."""
    ckpt_path = model_dir / f"seed{rep}" / "checkpoint.pt"
    if ckpt_path.is_file():
        log.info("reusing checkpoint %s", ckpt_path)
        return rebuild_model(load_checkpoint(ckpt_path))
    if mcfg is None:
        mcfg = resolve_model_config(kind, cfg.model, cfg.resolution)
    extra = dict(train_extra or {})
    if kind == "morphaeus" and "deformation_start_epoch" not in cfg.train:
        extra.setdefault("deformation_start_epoch", mcfg.deformation_start_epoch)
    seed = cfg.seed + rep
    tcfg = resolve_train_config(kind, cfg.train, seed, **extra)
    model = _build_model(kind, mcfg, derive_seed(seed, "init", kind))
    log.info("training %s (replicate %d) into %s", kind, rep, ckpt_path.parent)
    _, history = train(model, split, tcfg, checkpoint_path=ckpt_path)
    history.to_csv(ckpt_path.parent / "history.csv")
    return model


# ------------------------------------------------------------- evaluation


def reconstruct(model, images, batch_size: int = 32) -> np.ndarray:
    x = to_tensor(images)
    outs = [pseudo_healthy(model, x[lo : lo + batch_size]) for lo in range(0, len(x), batch_size)]
    return torch.cat(outs).numpy()


def residual_scores(model, images, mode: str) -> np.ndarray:
    return anomaly_score(np.asarray(images), reconstruct(model, images), mode)


def _fidelity(model, images, extractor) -> dict:
    recon = reconstruct(model, images)
    return {
        "ssim": ssim(images, recon),
        "perceptual_distance": perceptual_distance(images, recon, extractor),
    }


def _capped(images: np.ndarray, cap: int, seed: int) -> np.ndarray:
    if len(images) <= cap:
        return images
    idx = np.random.default_rng(seed).choice(len(images), size=cap, replace=False)
    return images[np.sort(idx)]


def _get_classifier(cfg, split: DatasetSplit, exp_dir: Path) -> DomainClassifier:
    path = exp_dir / "domain_classifier.pt"
    if path.is_file():
        payload = torch.load(path, map_location="cpu", weights_only=False)
        clf = DomainClassifier(
            payload["classes"], payload["resolution"],
            in_channels=payload["in_channels"], width=payload["width"],
        )
        clf.load_state_dict(payload["state_dict"])
        clf.holdout_accuracy = payload["holdout_accuracy"]
        clf.eval()
        return clf
    floor = 0.99 if cfg.data_root is not None else 1.0  # synthetic classes separate exactly
    clf = train_domain_classifier(split, accuracy_floor=floor, seed=cfg.seed)
    torch.save(
        {
            "classes": clf.classes,
            "resolution": clf.resolution,
            "in_channels": clf.in_channels,
            "width": clf.width,
            "state_dict": clf.state_dict(),
            "holdout_accuracy": clf.holdout_accuracy,
        },
        path,
    )
    return clf


def _provenance(cfg, split: DatasetSplit, extractor) -> dict:
    return {
        "config_hash": cfg.config_hash(),
        "manifest_hash": split.manifest_hash(),
        "extractor": cfg.extractor,
        "extractor_hash": extractor.identity_hash,
        "score_mode": cfg.score_mode,
        "seeds": cfg.seeds,
    }


def _model_rows(cfg, kinds, train_one, evaluate_one, key="model",
                name_of=lambda kind: kind) -> tuple[list[dict], dict]:
    """Train/evaluate each kind over the replicates; failures become rows.

    ``train_one(kind, rep) -> model`` and ``evaluate_one(kind, model, rep)
    -> row`` supply the experiment-specific behavior. A kind whose training
    raises yields a row flagged ``failed`` and the run moves on.
    """
    rows = []
    per_seed: dict[str, list[dict]] = {}
    for kind in kinds:
        name = name_of(kind)
        seed_rows = []
        failed = None
        for rep in range(cfg.seeds):
            try:
                model = train_one(kind, rep)
                seed_rows.append(evaluate_one(kind, model, rep))
            except MorphaeusError as e:
                log.error("%s failed on replicate %d: %s", name, rep, e)
                failed = {key: name, "failed": True, "error": str(e)}
                break
        if failed is not None:
            rows.append(failed)
            continue
        rows.append(median_rows(seed_rows))
        per_seed[str(name)] = seed_rows
    return rows, per_seed


# -------------------------------------------------------------------- ood


def run_ood(cfg: ExperimentConfig) -> ExperimentReport:
    """Train on one class, measure how foreign classes are pulled back."""
    exp_dir = cfg.experiment_dir()
    exp_dir.mkdir(parents=True, exist_ok=True)
    split, _ = resolve_dataset(cfg, exp_dir)
    train_class = _pick_train_class(cfg, split)
    ood_names = list(cfg.ood_classes) or [l for l in split.labels if l != train_class]
    for name in ood_names:
        if name not in split.labels:
            raise ConfigurationError(f"ood class {name!r} not in dataset {split.labels}")
    if not ood_names:
        raise ConfigurationError("no ood classes left after excluding the train class")

    in_split = split.filter_label(train_class)
    extractor = build_extractor(cfg.extractor, in_channels=1)
    classifier = _get_classifier(cfg, split, exp_dir)
    train_images, _ = in_split.stack("train")
    train_stats = feature_stats(
        _capped(train_images, FID_SAMPLE_CAP, derive_seed(cfg.seed, "fid-train")), extractor
    )
    test_in, _ = in_split.stack("test")
    ood_test = {name: split.filter_label(name).stack("test")[0] for name in ood_names}

    def train_one(kind, rep):
        return train_or_resume(kind, cfg, in_split, exp_dir / kind, rep)

    def evaluate_one(kind, model, rep):
        row = {"model": kind, "failed": False}
        row.update(_fidelity(model, test_in, extractor))
        result = manifold_test(
            model, train_stats, ood_test, classifier, extractor, train_class
        )
        row["mean_fid"] = result.mean_fid_recon
        row["mean_fid_input"] = result.mean_fid_input
        row["mean_confidence"] = result.confidence
        row["manifold_pass"] = result.passed
        normal_scores = residual_scores(model, test_in, cfg.score_mode)
        by_class = {train_class: normal_scores}
        for name in ood_names:
            scores = residual_scores(model, ood_test[name], cfg.score_mode)
            row[f"auroc_{name}"] = auroc(ScoreSet.from_groups(normal_scores, scores))
            by_class[name] = scores
        if rep == 0:
            density_plot(by_class, exp_dir / kind / "figures" / "score_density.png")
        return row

    rows, per_seed = _model_rows(cfg, cfg.models, train_one, evaluate_one)
    provenance = _provenance(cfg, split, extractor)
    report = ExperimentReport(
        "ood", rows, provenance,
        details={"train_class": train_class, "ood_classes": ood_names,
                 "train_stat_count": train_stats.count, "per_seed": per_seed},
    ).validate()
    report.write(exp_dir)
    for row in rows:
        ExperimentReport(
            "ood", [row], provenance,
            details={"per_seed": per_seed.get(row["model"], [])},
        ).write(exp_dir / row["model"])
    return report


# -------------------------------------------------- pathology and ablation


def _pathology_metrics(model, healthy, abnormal_by_class, mode, extractor) -> tuple[dict, dict]:
    row = {"failed": False}
    row.update(_fidelity(model, healthy, extractor))
    healthy_scores = residual_scores(model, healthy, mode)
    scores_by_class = {"healthy": healthy_scores}
    for name, images in sorted(abnormal_by_class.items()):
        scores = residual_scores(model, images, mode)
        scores_by_class[name] = scores
        s = ScoreSet.from_groups(healthy_scores, scores)
        row[f"fpr95_{name}"] = fpr_at_tpr(s, 0.95)
        row[f"fpr99_{name}"] = fpr_at_tpr(s, 0.99)
        row[f"auprc_{name}"] = auprc(s)
        row[f"auroc_{name}"] = auroc(s)
    return row, scores_by_class


def _quantile_indices(n: int, k: int) -> np.ndarray:
    return np.unique(np.linspace(0, n - 1, min(k, n)).round().astype(int))


def _write_case_artifacts(model, images, ids, scores, out_dir: Path, k: int) -> None:
    """Pseudo-healthy plus heatmap for cases spanning best to worst score."""
    order = np.argsort(scores, kind="mergesort")
    recon = reconstruct(model, images)
    for rank, pos in enumerate(_quantile_indices(len(order), k)):
        idx = order[pos]
        stem = f"case{rank:02d}_{str(ids[idx]).replace('/', '-')}"
        save_image(images[idx], out_dir / f"{stem}_input.png")
        save_image(recon[idx], out_dir / f"{stem}_pseudo_healthy.png")
        residual_heatmap(images[idx], recon[idx], out_dir / f"{stem}_heatmap.png")


def _extreme_exemplars(images, scores) -> dict[str, np.ndarray]:
    order = np.argsort(scores, kind="mergesort")
    picks = {"min": order[0], "median": order[len(order) // 2], "max": order[-1]}
    return {which: images[idx] for which, idx in picks.items()}


def _save_tails_artifacts(model_dir, scores_by_class, exemplars, mode) -> None:
    payload = {
        "score_mode": mode,
        "sets": {
            name: {"scores": [float(v) for v in scores]}
            for name, scores in scores_by_class.items()
        },
    }
    (model_dir / "scores.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    np.savez(model_dir / "exemplars.npz", **exemplars)


def _run_pathology_like(cfg, kinds, variant_mode: bool) -> ExperimentReport:
    exp_dir = cfg.experiment_dir()
    exp_dir.mkdir(parents=True, exist_ok=True)
    split, _ = resolve_dataset(cfg, exp_dir)
    train_class = _pick_train_class(cfg, split)
    in_split = split.filter_label(train_class)
    abnormal_names = [l for l in split.labels if l != train_class]
    if not abnormal_names:
        raise ConfigurationError("pathology experiment needs at least one abnormal class")
    abnormal = {
        name: split.filter_label(name).stack("test")[0] for name in abnormal_names
    }
    for name, images in abnormal.items():
        if len(images) == 0:
            raise ConfigurationError(f"abnormal class {name!r} has no test samples")
    healthy, _ = in_split.stack("test")
    abnormal_ids = {
        name: [s.id for s in split.filter_label(name).test] for name in abnormal_names
    }
    extractor = build_extractor(cfg.extractor, in_channels=1)

    def train_one(kind, rep):
        if variant_mode:
            name, extra = kind
            return train_or_resume(
                "morphaeus", cfg, in_split, exp_dir / f"morphaeus-{name}", rep,
                train_extra=extra,
            )
        return train_or_resume(kind, cfg, in_split, exp_dir / kind, rep)

    def evaluate_one(kind, model, rep):
        name = kind[0] if variant_mode else kind
        model_dir = exp_dir / (f"morphaeus-{name}" if variant_mode else name)
        row, scores_by_class = _pathology_metrics(
            model, healthy, abnormal, cfg.score_mode, extractor
        )
        row = {("variant" if variant_mode else "model"): name, **row}
        if rep == 0:
            exemplars = {}
            for cls, images in sorted(abnormal.items()):
                _write_case_artifacts(
                    model, images, abnormal_ids[cls], scores_by_class[cls],
                    model_dir / "figures" / cls, cfg.heatmap_k,
                )
                for which, img in _extreme_exemplars(images, scores_by_class[cls]).items():
                    exemplars[f"{cls}:{which}"] = img
            pooled_images = np.concatenate([abnormal[c] for c in sorted(abnormal)])
            pooled_scores = np.concatenate(
                [scores_by_class[c] for c in sorted(abnormal)]
            )
            for which, img in _extreme_exemplars(pooled_images, pooled_scores).items():
                exemplars[f"abnormal:{which}"] = img
            for which, img in _extreme_exemplars(healthy, scores_by_class["healthy"]).items():
                exemplars[f"healthy:{which}"] = img
            _save_tails_artifacts(model_dir, scores_by_class, exemplars, cfg.score_mode)
            density_plot(scores_by_class, model_dir / "figures" / "score_density.png")
        return row

    key = "variant" if variant_mode else "model"
    rows, per_seed = _model_rows(
        cfg, kinds, train_one, evaluate_one, key=key,
        name_of=(lambda k: k[0]) if variant_mode else (lambda k: k),
    )
    provenance = _provenance(cfg, split, extractor)
    experiment = "ablation" if variant_mode else "pathology"
    report = ExperimentReport(
        experiment, rows, provenance,
        details={"train_class": train_class, "abnormal_classes": abnormal_names,
                 "per_seed": per_seed},
    ).validate()
    report.write(exp_dir)
    for row in rows:
        name = f"morphaeus-{row[key]}" if variant_mode else row[key]
        ExperimentReport(
            experiment, [row], provenance,
            details={"per_seed": per_seed.get(row[key], [])},
        ).write(exp_dir / name)
    return report


def run_pathology(cfg: ExperimentConfig) -> ExperimentReport:
    """Train on healthy data, score each abnormal class, save case studies."""
    return _run_pathology_like(cfg, cfg.models, variant_mode=False)


def run_ablation(cfg: ExperimentConfig) -> ExperimentReport:
    """Pathology metrics for the full objective and its two reductions."""
    return _run_pathology_like(cfg, ABLATION_VARIANTS, variant_mode=True)


# ------------------------------------------------------------ depth sweep


def run_depth_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    """Plain spatial AEs from shallow to deep: copy-versus-blur trade-off."""
    exp_dir = cfg.experiment_dir()
    exp_dir.mkdir(parents=True, exist_ok=True)
    split, _ = resolve_dataset(cfg, exp_dir)
    train_class = _pick_train_class(cfg, split)
    in_split = split.filter_label(train_class)
    other_names = [l for l in split.labels if l != train_class]
    if not other_names:
        raise ConfigurationError("depth sweep needs at least one non-training class")
    test_in, _ = in_split.stack("test")
    other = {name: split.filter_label(name).stack("test")[0] for name in other_names}
    other_pooled = np.concatenate([other[n] for n in other_names])
    extractor = build_extractor(cfg.extractor, in_channels=1)

    grid_inputs = [("in:" + train_class, test_in[0])]
    grid_inputs += [("ood:" + name, other[name][0]) for name in other_names]
    grid_rows: list[list[np.ndarray]] = [[img] for _, img in grid_inputs]
    grid_depths: list[int] = []

    def train_one(depth, rep):
        mcfg = dataclasses.replace(resolve_model_config("spatial-ae", cfg.model, cfg.resolution),
                                   spatial_depth=depth)
        return train_or_resume(
            "spatial-ae", cfg, in_split, exp_dir / f"depth{depth}", rep, mcfg=mcfg
        )

    def evaluate_one(depth, model, rep):
        row = {"depth": depth, "failed": False}
        row["ssim_in"] = ssim(test_in, reconstruct(model, test_in))
        row["ssim_ood"] = ssim(other_pooled, reconstruct(model, other_pooled))
        normal_scores = residual_scores(model, test_in, cfg.score_mode)
        foreign_scores = residual_scores(model, other_pooled, cfg.score_mode)
        row["auroc"] = auroc(ScoreSet.from_groups(normal_scores, foreign_scores))
        if rep == 0:
            stack = np.stack([img for _, img in grid_inputs])
            recons = reconstruct(model, stack)
            for i in range(len(grid_rows)):
                grid_rows[i].append(recons[i])
            grid_depths.append(depth)
        return row

    rows, per_seed = _model_rows(cfg, cfg.depths, train_one, evaluate_one, key="depth")
    grid_path = exp_dir / "figures" / "reconstruction_grid.png"
    n_rows, n_cols = image_grid(
        grid_rows, grid_path,
        col_titles=["input"] + [f"depth {d}" for d in grid_depths],
        row_titles=[name for name, _ in grid_inputs],
    )
    report = ExperimentReport(
        "depth-sweep", rows, _provenance(cfg, split, extractor),
        details={
            "train_class": train_class,
            "grid": {"rows": n_rows, "cols": n_cols, "path": str(grid_path)},
            "per_seed": per_seed,
        },
    ).validate()
    report.write(exp_dir)
    return report


# ------------------------------------------------------------------ tails


def run_tails(cfg: ExperimentConfig) -> ExperimentReport:
    """Score-distribution tails from a finished pathology run's artifacts."""
    exp_dir = cfg.experiment_dir()
    source_root = Path(cfg.output_dir) / "pathology"
    rows = []
    details: dict = {"source": str(source_root), "exemplars": {}}
    for kind in cfg.models:
        model_dir = source_root / kind
        scores_path = model_dir / "scores.json"
        exemplar_path = model_dir / "exemplars.npz"
        if not scores_path.is_file() or not exemplar_path.is_file():
            raise MorphaeusError(
                f"missing pathology artifacts for {kind!r} under {model_dir}; "
                "run the pathology experiment first (run-experiment with kind: pathology)"
            )
        payload = json.loads(scores_path.read_text())
        sets = payload["sets"]
        healthy = np.asarray(sets["healthy"]["scores"], dtype=np.float64)
        abnormal = np.concatenate(
            [np.asarray(sets[name]["scores"], dtype=np.float64)
             for name in sorted(sets) if name != "healthy"]
        )
        overlap = score_overlap(healthy, abnormal, cfg.overlap_bins)
        out_dir = exp_dir / kind
        figures = out_dir / "figures"
        density_plot({"healthy": healthy, "abnormal": abnormal},
                     figures / "score_density.png")
        exemplars = np.load(exemplar_path)
        written = []
        for label in ("healthy", "abnormal"):
            for which in ("min", "median", "max"):
                path = save_image(exemplars[f"{label}:{which}"],
                                  figures / f"{label}_{which}.png")
                written.append(str(path))
        row = {
            "model": kind,
            "failed": False,
            "overlap": overlap,
            "n_healthy": len(healthy),
            "n_abnormal": len(abnormal),
            "healthy_median": float(np.median(healthy)),
            "abnormal_median": float(np.median(abnormal)),
        }
        rows.append(row)
        details["exemplars"][kind] = written
        ExperimentReport(
            "tails", [row], {"config_hash": cfg.config_hash(),
                             "score_mode": payload["score_mode"],
                             "overlap_bins": cfg.overlap_bins},
        ).write(out_dir)
    report = ExperimentReport(
        "tails", rows,
        {"config_hash": cfg.config_hash(), "overlap_bins": cfg.overlap_bins},
        details=details,
    ).validate()
    report.write(exp_dir)
    return report


# --------------------------------------------------------------- dispatch


RUNNERS = {
    "ood": run_ood,
    "pathology": run_pathology,
    "ablation": run_ablation,
    "depth-sweep": run_depth_sweep,
    "tails": run_tails,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    return RUNNERS[cfg.kind](cfg)


def describe_plan(cfg: ExperimentConfig) -> str:
    """Human-readable resolved plan, used by --dry-run."""
    if cfg.data_root is not None:
        dataset = f"image folder {cfg.data_root}"
    elif cfg.synthetic_shapes is not None:
        dataset = f"generated shape classes {cfg.synthetic_shapes}"
    elif cfg.synthetic is not None:
        dataset = f"synthetic phantoms {cfg.synthetic}"
    else:
        dataset = "artifacts of a finished pathology run"
    lines = [
        f"experiment={cfg.kind}",
        f"dataset={dataset}",
        f"resolution={cfg.resolution}",
        f"models={','.join(str(m) for m in cfg.models)}"
        if cfg.kind != "depth-sweep"
        else f"depths={','.join(str(d) for d in cfg.depths)}",
        f"seeds={cfg.seeds} (base seed {cfg.seed})",
        f"score_mode={cfg.score_mode}",
        f"output={cfg.experiment_dir()}",
        f"config_hash={cfg.config_hash()}",
    ]
    return "\n".join(lines)
