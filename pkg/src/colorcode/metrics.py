"""Image quality metrics (PSNR, SSIM, UIQM) and code-distribution
diagnostics. All metric entry points take 8-bit RGB arrays; the training-side
structure loss is a separate operation on normalized tensors.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)

PSNR_CAP = 100.0
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

UIQM_C = (0.0282, 0.2953, 3.5753)
EME_BLOCK = 8
LOGAMEE_BLOCK = 16
PLIP_GAMMA = 1026.0


class MetricError(ValueError):
    pass


def _as_float(img) -> np.ndarray:
    return np.asarray(img).astype(np.float64)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB over the 8-bit range, capped at
    100 dB for identical inputs."""
    a, b = _as_float(a), _as_float(b)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / mse))


def _luminance(img: np.ndarray) -> np.ndarray:
    r, g, b = LUMA_WEIGHTS
    return r * img[..., 0] + g * img[..., 1] + b * img[..., 2]


def _gaussian_kernel(radius: int = 5, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 2-D correlation keeping only the fully covered interior."""
    pad = len(kernel) // 2
    out = np.apply_along_axis(lambda r: np.convolve(r, kernel[::-1], mode="valid"), 1, img)
    out = np.apply_along_axis(lambda c: np.convolve(c, kernel[::-1], mode="valid"), 0, out)
    assert out.shape == (img.shape[0] - 2 * pad, img.shape[1] - 2 * pad)
    return out


def ssim(a, b) -> float:
    """Mean SSIM on ITU-R 601 luminance over the 8-bit dynamic range with an
    11x11 Gaussian window (sigma 1.5), evaluated on the valid interior."""
    a, b = _as_float(a), _as_float(b)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a, b = _luminance(a), _luminance(b)
    if a.shape[0] < 11 or a.shape[1] < 11:
        raise MetricError("images smaller than the 11x11 SSIM window")
    kern = _gaussian_kernel()
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    mu_a = _filter_valid(a, kern)
    mu_b = _filter_valid(b, kern)
    var_a = _filter_valid(a * a, kern) - mu_a ** 2
    var_b = _filter_valid(b * b, kern) - mu_b ** 2
    cov = _filter_valid(a * b, kern) - mu_a * mu_b
    s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2) /
         ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return float(s.mean())


# --- UIQM: colorfulness + sharpness + contrast ---


def _trimmed_stats(values: np.ndarray, alpha: float = 0.1) -> Tuple[float, float]:
    flat = np.sort(values, axis=None)
    t = int(alpha * flat.size)
    trimmed = flat[t:flat.size - t]
    mu = float(trimmed.mean())
    var = float(np.mean((trimmed - mu) ** 2))
    return mu, var


def _uicm(img: np.ndarray) -> float:
    rg = img[..., 0] - img[..., 1]
    yb = 0.5 * (img[..., 0] + img[..., 1]) - img[..., 2]
    mu_rg, var_rg = _trimmed_stats(rg)
    mu_yb, var_yb = _trimmed_stats(yb)
    return (-0.0268 * math.sqrt(mu_rg ** 2 + mu_yb ** 2)
            + 0.1586 * math.sqrt(var_rg + var_yb))


def _sobel_magnitude(ch: np.ndarray) -> np.ndarray:
    padded = np.pad(ch, 1, mode="symmetric")
    win = np.lib.stride_tricks.sliding_window_view(padded, (3, 3))
    gx_k = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    gy_k = gx_k.T
    gx = np.einsum("ijkl,kl->ij", win, gx_k)
    gy = np.einsum("ijkl,kl->ij", win, gy_k)
    return np.hypot(gx, gy)


def _block_minmax(ch: np.ndarray, size: int):
    h, w = ch.shape
    for i in range(math.ceil(h / size)):
        for j in range(math.ceil(w / size)):
            block = ch[i * size:(i + 1) * size, j * size:(j + 1) * size]
            yield float(block.min()), float(block.max())


def _eme(ch: np.ndarray, size: int = EME_BLOCK) -> float:
    blocks = list(_block_minmax(ch, size))
    total = 0.0
    for mn, mx in blocks:
        mn = mn if mn != 0.0 else 1.0
        mx = mx if mx != 0.0 else 1.0
        total += math.log(mx / mn)
    return 2.0 / len(blocks) * total


def _uism(img: np.ndarray) -> float:
    parts = []
    for c in range(3):
        ch = img[..., c]
        parts.append(_eme(ch * _sobel_magnitude(ch)))
    return sum(w * p for w, p in zip(LUMA_WEIGHTS, parts))


def _logamee(ch: np.ndarray, size: int = LOGAMEE_BLOCK) -> float:
    g = PLIP_GAMMA
    s = 0.0
    blocks = list(_block_minmax(ch, size))
    for mn, mx in blocks:
        top = g * (mx - mn) / (g - mn)
        bottom = mx + mn - mx * mn / g
        m = 0.0 if bottom == 0.0 else top / bottom
        if m != 0.0:
            s += m * math.log(m)
    w = 1.0 / len(blocks)
    return g - g * (1.0 - s / g) ** w


def uiqm(img) -> float:
    """Underwater image quality: weighted colorfulness (trimmed RG/YB
    statistics), sharpness (Sobel-weighted EME) and contrast (logAMEE on
    luminance)."""
    arr = _as_float(img)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise MetricError("uiqm needs an HxWx3 color image")
    c1, c2, c3 = UIQM_C
    return (c1 * _uicm(arr) + c2 * _uism(arr) + c3 * _logamee(_luminance(arr)))


# --- code-distribution diagnostics ---


@dataclass
class CodeHistogram:
    """Per-dimension histogram of a set of color codes."""

    bin_edges: List[List[float]]
    counts: List[List[int]]
    mean: List[float]
    std: List[float]
    n_samples: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @property
    def dimensions(self) -> int:
        return len(self.mean)


def code_histograms(codes, bins: int = 30) -> CodeHistogram:
    """Histogram, mean and std for each code dimension."""
    arr = np.asarray([np.asarray(c, dtype=np.float64).ravel() for c in codes])
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise MetricError("need at least two codes")
    edges, counts, means, stds = [], [], [], []
    for d in range(arr.shape[1]):
        col = arr[:, d]
        cnt, edg = np.histogram(col, bins=bins)
        edges.append([float(e) for e in edg])
        counts.append([int(c) for c in cnt])
        means.append(float(col.mean()))
        stds.append(float(col.std()))
    return CodeHistogram(bin_edges=edges, counts=counts, mean=means, std=stds,
                         n_samples=arr.shape[0])


def render_histograms(hist: CodeHistogram, png_path, json_path=None) -> None:
    """Write the per-dimension histogram figure and its JSON sidecar."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    dims = hist.dimensions
    cols = min(4, dims)
    rows = math.ceil(dims / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.4 * rows), squeeze=False)
    for d in range(rows * cols):
        ax = axes[d // cols][d % cols]
        if d >= dims:
            ax.axis("off")
            continue
        edges = np.asarray(hist.bin_edges[d])
        ax.bar(edges[:-1], hist.counts[d], width=np.diff(edges), align="edge")
        ax.axvline(hist.mean[d], color="red", linewidth=1)
        ax.axvline(0.0, color="green", linewidth=1)
        ax.set_title(f"dim {d}: mean {hist.mean[d]:.2f}, std {hist.std[d]:.2f}", fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    if json_path is not None:
        Path(json_path).write_text(hist.to_json())


def adaptation_uiqm_sweep(session, x, guidance,
                          alphas: Sequence[float] = (0.1, 0.2, 0.3, 0.4, 0.5)) -> Dict[str, float]:
    """Quality drift of adaptation versus the fixed enhancement, as
    UIQM(adapt(x, g, a)) - UIQM(enhance(x)) per fusion weight. Diagnostic
    only; the useful band depends on training."""
    from colorcode.core import denormalize_image
    from colorcode.inference import AdaptationRequest

    base = uiqm(denormalize_image(session.enhance(x)))
    sweep = {}
    for alpha in alphas:
        out = session.adapt(AdaptationRequest(x=x, guidance=guidance, alpha=float(alpha)))
        sweep[f"{alpha:.2f}"] = uiqm(denormalize_image(out)) - base
    return sweep


def render_code_scatter(codes_distorted, codes_reference, png_path, json_path=None) -> None:
    """2-D encoding-space map of distorted versus reference images
    (code_length must be 2)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    a = np.asarray(codes_distorted, dtype=np.float64)
    b = np.asarray(codes_reference, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 2 or b.ndim != 2 or b.shape[1] != 2:
        raise MetricError("code scatter needs n x 2 code arrays")
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(a[:, 0], a[:, 1], s=14, label="distorted", alpha=0.7)
    ax.scatter(b[:, 0], b[:, 1], s=14, label="reference", alpha=0.7, marker="x")
    ax.axhline(0, color="gray", linewidth=0.6)
    ax.axvline(0, color="gray", linewidth=0.6)
    ax.legend()
    ax.set_xlabel("code dim 0")
    ax.set_ylabel("code dim 1")
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    if json_path is not None:
        Path(json_path).write_text(json.dumps(
            {"distorted": a.tolist(), "reference": b.tolist()}, sort_keys=True))


def dominant_color(img, mask: Optional[np.ndarray] = None,
                   center: Optional[Tuple[int, int]] = None,
                   seed: int = 0) -> Tuple[int, int, int]:
    """Main color of a region: k-means (k=3) over the pixels around the
    region's center of mass, returning the largest cluster's centroid."""
    arr = _as_float(img)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise MetricError("dominant_color needs an HxWx3 image")
    h, w = arr.shape[:2]
    window = max(8, min(h, w) // 4)
    if mask is not None:
        mask = np.asarray(mask).astype(bool)
        if mask.shape != (h, w):
            raise MetricError("mask shape does not match image")
        if not mask.any():
            raise MetricError("empty region")
        ys, xs = np.nonzero(mask)
        cy, cx = int(round(ys.mean())), int(round(xs.mean()))
        region = np.zeros((h, w), dtype=bool)
        region[max(0, cy - window):cy + window, max(0, cx - window):cx + window] = True
        region &= mask
        if not region.any():
            region = mask
    elif center is not None:
        cy, cx = int(center[0]), int(center[1])
        region = np.zeros((h, w), dtype=bool)
        region[max(0, cy - window):cy + window, max(0, cx - window):cx + window] = True
        if not region.any():
            raise MetricError("empty region")
    else:
        raise MetricError("either a mask or a center point is required")
    pixels = arr[region].reshape(-1, 3)
    centroid = _largest_kmeans_centroid(pixels, k=3, seed=seed)
    return tuple(int(round(v)) for v in np.clip(centroid, 0, 255))


def _largest_kmeans_centroid(pixels: np.ndarray, k: int, seed: int,
                             iters: int = 50) -> np.ndarray:
    rng = np.random.default_rng(seed)
    centers = pixels[rng.choice(len(pixels), size=min(k, len(pixels)), replace=False)]
    centers = centers.astype(np.float64)
    for _ in range(iters):
        d = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        labels = d.argmin(1)
        new = np.array([pixels[labels == i].mean(0) if (labels == i).any() else centers[i]
                        for i in range(len(centers))])
        if np.allclose(new, centers):
            centers = new
            break
        centers = new
    d = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
    labels = d.argmin(1)
    sizes = np.bincount(labels, minlength=len(centers))
    return centers[sizes.argmax()]


# --- dataset evaluation ---


@dataclass
class EvaluationRow:
    sample_id: str
    psnr: float
    ssim: float
    uiqm: float


@dataclass
class EvaluationTable:
    rows: List[EvaluationRow]
    means: Dict[str, float]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "psnr", "ssim", "uiqm"])
            for r in self.rows:
                writer.writerow([r.sample_id, f"{r.psnr:.4f}", f"{r.ssim:.6f}", f"{r.uiqm:.6f}"])
            writer.writerow(["mean", f"{self.means['psnr']:.4f}",
                             f"{self.means['ssim']:.6f}", f"{self.means['uiqm']:.6f}"])

    def write_json(self, path) -> None:
        payload = {"rows": [r.__dict__ for r in self.rows], "means": self.means}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def evaluate_dataset(session, dataset) -> EvaluationTable:
    """Enhance every test pair and score it; unreadable samples are skipped
    with a log line."""
    from colorcode.core import denormalize_image, normalize_image
    from colorcode.data import _load_rgb, _resize_short_side

    if len(dataset.pairs) == 0:
        raise MetricError("dataset is empty")
    size = session.config.image_size
    rows = []
    for inp_path, gt_path in dataset.pairs:
        try:
            x8 = _center_square(_resize_short_side(_load_rgb(inp_path), size), size)
            y8 = _center_square(_resize_short_side(_load_rgb(gt_path), size), size)
        except Exception as err:
            log.warning("skipping unreadable pair %s: %s", inp_path.name, err)
            continue
        out = denormalize_image(session.enhance(normalize_image(x8)))
        rows.append(EvaluationRow(
            sample_id=inp_path.name,
            psnr=psnr(out, y8),
            ssim=ssim(out, y8),
            uiqm=uiqm(out),
        ))
    if not rows:
        raise MetricError("no readable pairs in the dataset")
    rows.sort(key=lambda r: r.sample_id)
    means = {
        "psnr": float(np.mean([r.psnr for r in rows])),
        "ssim": float(np.mean([r.ssim for r in rows])),
        "uiqm": float(np.mean([r.uiqm for r in rows])),
    }
    return EvaluationTable(rows=rows, means=means)


def _center_square(arr: np.ndarray, size: int) -> np.ndarray:
    h, w = arr.shape[:2]
    top, left = (h - size) // 2, (w - size) // 2
    return arr[top:top + size, left:left + size]
