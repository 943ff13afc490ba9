"""Reproducible experiment pipelines and their reports."""

from morphaeus.experiments.config import (
    EXPERIMENT_KINDS,
    MODEL_KINDS,
    ExperimentConfig,
    apply_overrides,
    config_from_mapping,
    load_config,
    resolve_model_config,
    resolve_train_config,
    validate_config,
)
from morphaeus.experiments.figures import (
    density_plot,
    image_grid,
    save_image,
    score_overlap,
)
from morphaeus.experiments.report import ExperimentReport, load_report, median_rows
from morphaeus.experiments.runner import (
    describe_plan,
    reconstruct,
    residual_scores,
    resolve_dataset,
    run_ablation,
    run_depth_sweep,
    run_experiment,
    run_ood,
    run_pathology,
    run_tails,
    train_or_resume,
)

__all__ = [
    "EXPERIMENT_KINDS",
    "MODEL_KINDS",
    "ExperimentConfig",
    "ExperimentReport",
    "apply_overrides",
    "config_from_mapping",
    "density_plot",
    "describe_plan",
    "image_grid",
    "load_config",
    "load_report",
    "median_rows",
    "reconstruct",
    "residual_scores",
    "resolve_dataset",
    "resolve_model_config",
    "resolve_train_config",
    "run_ablation",
    "run_depth_sweep",
    "run_experiment",
    "run_ood",
    "run_pathology",
    "run_tails",
    "save_image",
    "score_overlap",
    "train_or_resume",
    "validate_config",
]
