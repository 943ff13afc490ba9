"""Data ingestion: folder loading, deterministic splits, synthetic scenes."""

from morphaeus.datasets.folders import load_image_folder, sample_ood
from morphaeus.datasets.noise import NoiseSpec, corrupt
from morphaeus.datasets.split import DatasetSplit, Sample, split_counts
from morphaeus.datasets.synthetic import (
    SyntheticSpec,
    generate_shape_dataset,
    make_synthetic,
    synthesize_pair,
)

__all__ = [
    "DatasetSplit",
    "NoiseSpec",
    "Sample",
    "SyntheticSpec",
    "corrupt",
    "generate_shape_dataset",
    "load_image_folder",
    "make_synthetic",
    "sample_ood",
    "split_counts",
    "synthesize_pair",
]
