"""Figure rendering for experiment outputs. All files are PNG via Agg."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from morphaeus.utils import to_numpy


def _gray(img) -> np.ndarray:
    a = np.squeeze(np.asarray(to_numpy(img), dtype=np.float64))
    if a.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {a.shape}")
    return np.clip(a, 0.0, 1.0)


def save_image(img, path: str | Path) -> Path:
    """Write one grayscale image in [0, 1] as an 8-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray((_gray(img) * 255.0 + 0.5).astype(np.uint8)).save(path)
    return path


def image_grid(
    rows: list[list[np.ndarray]],
    path: str | Path,
    col_titles: list[str] | None = None,
    row_titles: list[str] | None = None,
) -> tuple[int, int]:
    """Render a rows x cols grid of grayscale images; returns (rows, cols)."""
    n_rows = len(rows)
    n_cols = len(rows[0])
    if any(len(r) != n_cols for r in rows):
        raise ValueError("all grid rows must have the same number of images")
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(1.4 * n_cols, 1.4 * n_rows), squeeze=False
    )
    for i, row in enumerate(rows):
        for j, img in enumerate(row):
            ax = axes[i][j]
            ax.imshow(_gray(img), cmap="gray", vmin=0.0, vmax=1.0)
            ax.set_xticks([])
            ax.set_yticks([])
            if i == 0 and col_titles:
                ax.set_title(col_titles[j], fontsize=7)
            if j == 0 and row_titles:
                ax.set_ylabel(row_titles[i], fontsize=7)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return n_rows, n_cols


def density_plot(scores_by_class: dict[str, np.ndarray], path: str | Path) -> Path:
    """Kernel-density view of score distributions, one curve per class.

    Degenerate classes (fewer than 2 points or zero variance) fall back to
    a vertical marker so the figure never fails on desk-scale data.
    """
    from scipy.stats import gaussian_kde

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3))
    everything = np.concatenate([np.asarray(v, dtype=np.float64) for v in scores_by_class.values()])
    lo, hi = float(everything.min()), float(everything.max())
    pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1e-3)
    grid = np.linspace(lo - pad, hi + pad, 512)
    for name in sorted(scores_by_class):
        values = np.asarray(scores_by_class[name], dtype=np.float64)
        if len(values) >= 2 and values.std() > 0:
            ax.plot(grid, gaussian_kde(values)(grid), label=name)
        else:
            ax.axvline(float(values.mean()), linestyle="--", label=name)
    ax.set_xlabel("anomaly score")
    ax.set_ylabel("density")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def score_overlap(a, b, bins: int = 64) -> float:
    """Histogram-intersection overlap of two score samples, in [0, 1].

    Shared equal-width bins span both samples; the overlap is the summed
    minimum of the two per-bin probability masses.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) == 0 or len(b) == 0:
        raise ValueError("overlap needs scores from both classes")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        return 1.0
    edges = np.linspace(lo, hi, bins + 1)
    pa, _ = np.histogram(a, bins=edges)
    pb, _ = np.histogram(b, bins=edges)
    return float(np.minimum(pa / len(a), pb / len(b)).sum())
