"""Independent reference implementations used to check the package.

Everything here is written the slow, obvious way (scalar loops, direct
definitions) and must not import the code under test beyond plain tensor
types. Tests compare package output against these oracles.
"""

from __future__ import annotations

import numpy as np
import torch


def bilinear_warp_oracle(image: np.ndarray, field: np.ndarray) -> np.ndarray:
    """Per-pixel scalar bilinear resampling with border clamping.

    image: (H, W) float array. field: (2, H, W), channel 0 = x displacement
    (columns), channel 1 = y displacement (rows). Output pixel (i, j) is the
    bilinear sample of image at (i + field[1,i,j], j + field[0,i,j]) with
    the sample position clamped to the image rectangle.
    """
    h, w = image.shape
    out = np.zeros_like(image)
    for i in range(h):
        for j in range(w):
            sx = min(max(j + field[0, i, j], 0.0), w - 1.0)
            sy = min(max(i + field[1, i, j], 0.0), h - 1.0)
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = sx - x0
            fy = sy - y0
            top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
            bot = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
            out[i, j] = top * (1 - fy) + bot * fy
    return out


def lncc_oracle(a: np.ndarray, b: np.ndarray, window: int, eps: float = 1e-5) -> float:
    """Direct per-window normalized cross-correlation, valid windows only."""
    h, w = a.shape
    r = window // 2
    vals = []
    for i in range(r, h - r):
        for j in range(r, w - r):
            pa = a[i - r : i + r + 1, j - r : j + r + 1].astype(np.float64)
            pb = b[i - r : i + r + 1, j - r : j + r + 1].astype(np.float64)
            va = pa.var()
            vb = pb.var()
            cov = ((pa - pa.mean()) * (pb - pb.mean())).mean()
            vals.append(cov / np.sqrt(max(va, eps) * max(vb, eps)))
    return float(np.mean(vals))


def smoothness_oracle(field: np.ndarray) -> float:
    """Forward-difference diffusion penalty via explicit loops.

    field: (2, H, W). Squared differences are summed over the two vector
    components, then averaged per difference direction.
    """
    _, h, w = field.shape
    sx = 0.0
    for i in range(h):
        for j in range(w - 1):
            for c in range(2):
                d = field[c, i, j + 1] - field[c, i, j]
                sx += d * d
    sy = 0.0
    for i in range(h - 1):
        for j in range(w):
            for c in range(2):
                d = field[c, i + 1, j] - field[c, i, j]
                sy += d * d
    return sx / (h * (w - 1)) + sy / ((h - 1) * w)


def finite_difference_grad(fn, x: torch.Tensor, h: float = 1e-5) -> torch.Tensor:
    """Central-difference gradient of scalar fn w.r.t. every element of x.

    fn is re-evaluated from scratch per probe; x is mutated in place and
    restored, so pass a tensor that nothing else aliases.
    """
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            fp = float(fn())
            flat[i] = orig - h
            fm = float(fn())
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def grad_rel_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    num = (analytic - numeric).norm().item()
    den = max(analytic.norm().item(), numeric.norm().item(), 1e-12)
    return num / den


def auroc_pairwise(scores: np.ndarray, labels: np.ndarray) -> float:
    """O(n^2) Mann-Whitney AUROC with half credit for ties."""
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def auprc_direct(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under precision-recall by summing precision at each recall step.

    Thresholds sweep the distinct score values from high to low; the area
    adds precision * (recall gain) per step, which is the interpolation-free
    definition.
    """
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    total_pos = y.sum()
    area = 0.0
    tp = 0
    fp = 0
    prev_recall = 0.0
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        tp += int(y[i:j].sum())
        fp += (j - i) - int(y[i:j].sum())
        recall = tp / total_pos
        precision = tp / (tp + fp)
        area += precision * (recall - prev_recall)
        prev_recall = recall
        i = j
    return area


def fpr_at_tpr_exhaustive(scores: np.ndarray, labels: np.ndarray, target: float) -> float:
    """Smallest FPR over every candidate threshold reaching the target TPR.

    Tries every distinct score as a threshold (predict anomalous when
    score >= threshold) plus one above the maximum.
    """
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    best = None
    candidates = list(np.unique(scores)) + [np.max(scores) + 1.0]
    for t in candidates:
        tpr = float((pos >= t).mean())
        fpr = float((neg >= t).mean())
        if tpr >= target and (best is None or fpr < best):
            best = fpr
    return best


def ssim_oracle(
    a: np.ndarray,
    b: np.ndarray,
    window: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Windowed SSIM via explicit per-window loops with Gaussian weights."""
    h, w = a.shape
    half = window // 2
    coords = np.arange(window) - (window - 1) / 2
    g = np.exp(-(coords**2) / (2 * sigma**2))
    g = g / g.sum()
    kern = np.outer(g, g)
    c1 = k1 * k1
    c2 = k2 * k2
    vals = []
    for i in range(half, h - half):
        for j in range(half, w - half):
            pa = a[i - half : i + half + 1, j - half : j + half + 1].astype(np.float64)
            pb = b[i - half : i + half + 1, j - half : j + half + 1].astype(np.float64)
            mu_a = (kern * pa).sum()
            mu_b = (kern * pb).sum()
            var_a = (kern * pa * pa).sum() - mu_a * mu_a
            var_b = (kern * pb * pb).sum() - mu_b * mu_b
            cov = (kern * pa * pb).sum() - mu_a * mu_b
            vals.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(vals))


def frechet_gaussian_oracle(mu_a, cov_a, mu_b, cov_b) -> float:
    """Squared Frechet distance computed purely with eigendecompositions.

    Uses the symmetrized cross term tr((A^1/2 B A^1/2)^1/2), which equals
    tr((AB)^1/2) for PSD A, B but only ever takes square roots of symmetric
    PSD matrices, so eigh is sufficient and numerically stable.
    """
    mu_a = np.asarray(mu_a, dtype=np.float64)
    mu_b = np.asarray(mu_b, dtype=np.float64)
    cov_a = np.asarray(cov_a, dtype=np.float64)
    cov_b = np.asarray(cov_b, dtype=np.float64)

    def psd_sqrt(m):
        vals, vecs = np.linalg.eigh(m)
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)) @ vecs.T

    cross = psd_sqrt(psd_sqrt(cov_a) @ cov_b @ psd_sqrt(cov_a))
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross))
