"""Scalar training objectives and their aggregation.

Sign conventions: the discriminators' maximization objective is negated so
everything here is minimized. Reconstruction losses are non-negative; the
enhancement loss and the code-distribution loss may be negative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import torch
import torch.nn.functional as F

from colorcode.core import TrainConfig

LOG_EPS = 1e-7
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


class LossError(ValueError):
    """A loss input violated its contract (shape mismatch, non-finite term)."""


def _gaussian_window(dtype, device):
    radius = SSIM_WINDOW // 2
    coords = torch.arange(-radius, radius + 1, dtype=dtype, device=device)
    g = torch.exp(-0.5 * (coords / SSIM_SIGMA) ** 2)
    g = g / g.sum()
    return g[:, None] * g[None, :]


def structure_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean SSIM over an 11x11 Gaussian window for [-1, 1] images.

    Channels are treated independently and averaged; the map is evaluated on
    the valid interior (no padding) so border effects never enter.
    """
    if a.shape != b.shape:
        raise LossError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.ndim == 3:
        a, b = a.unsqueeze(0), b.unsqueeze(0)
    if a.ndim != 4:
        raise LossError(f"expected (B,)CxHxW input, got {a.ndim} dims")
    if a.shape[-2] < SSIM_WINDOW or a.shape[-1] < SSIM_WINDOW:
        raise LossError(f"spatial dims must be >= {SSIM_WINDOW} for SSIM")
    c1 = (0.01 * 2.0) ** 2
    c2 = (0.03 * 2.0) ** 2
    channels = a.shape[1]
    win = _gaussian_window(a.dtype, a.device).expand(channels, 1, -1, -1)

    def filt(t):
        return F.conv2d(t, win, groups=channels)

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return (num / den).mean()


def enhancement_loss(y_hat: torch.Tensor, y: torch.Tensor,
                     structure_enabled: bool = True) -> torch.Tensor:
    """Mean squared error minus mean SSIM between the enhanced image and its
    reference (the SSIM term drops out under the structure-loss ablation)."""
    if y_hat.shape != y.shape:
        raise LossError(f"shape mismatch: {tuple(y_hat.shape)} vs {tuple(y.shape)}")
    mse = F.mse_loss(y_hat, y)
    if not structure_enabled:
        return mse
    return mse - structure_similarity(y_hat, y)


def self_reconstruction_loss(x, y, x_rec, y_rec) -> torch.Tensor:
    """L1 distance of each domain's own encode-decode round trip."""
    if x.shape != x_rec.shape or y.shape != y_rec.shape:
        raise LossError("reconstruction shape mismatch")
    return F.l1_loss(x_rec, x) + F.l1_loss(y_rec, y)


def content_code_reconstruction_loss(c_x, c_y, c_x_re, c_y_re) -> torch.Tensor:
    """L1 between the original content codes and the codes re-encoded from
    the cross-decoded images, summed over both directions."""
    return F.l1_loss(c_x_re, c_x) + F.l1_loss(c_y_re, c_y)


def style_code_reconstruction_loss(s_x, s_y, s_x_re, s_y_re) -> torch.Tensor:
    """Mirror of the content-code term over the sampled style vectors."""
    return F.l1_loss(s_x_re, s_x) + F.l1_loss(s_y_re, s_y)


def _mean_log(scores: torch.Tensor) -> torch.Tensor:
    return scores.clamp(LOG_EPS, 1.0 - LOG_EPS).log().mean()


def adversarial_loss_discriminator(real_scores: Sequence[torch.Tensor],
                                   fake_scores: Sequence[torch.Tensor]) -> torch.Tensor:
    """-[mean log(real) + mean log(1 - fake)], averaged over scales.

    Negated so the discriminator update is a minimization; fake scores must
    come from detached images.
    """
    if len(real_scores) != len(fake_scores):
        raise LossError("real/fake score pyramids differ in scale count")
    total = sum(_mean_log(r) + _mean_log(1.0 - f)
                for r, f in zip(real_scores, fake_scores))
    return -total / len(real_scores)


def adversarial_loss_generator(fake_scores: Sequence[torch.Tensor]) -> torch.Tensor:
    """Non-saturating generator objective: -mean log(fake), over scales."""
    total = sum(_mean_log(f) for f in fake_scores)
    return -total / len(fake_scores)


def _sq_dists(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return (a.unsqueeze(1) - b.unsqueeze(0)).pow(2).sum(-1)


_RBF_SCALES = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)


def kernel_matrix(a: torch.Tensor, b: torch.Tensor, kernel: str,
                  prior_std: float = 1.0) -> torch.Tensor:
    """Pairwise kernel values for the code-distribution estimator.

    'imq' is the inverse multiquadric C/(C + d^2) with C = 2*K*sigma^2;
    'rbf-mixture' averages Gaussians over a bandwidth ladder on the same C;
    'gaussian-unit' (exp(-d^2)) exists for hand-checkable tests.
    """
    d2 = _sq_dists(a, b)
    c = 2.0 * a.shape[1] * prior_std ** 2
    if kernel == "imq":
        return c / (c + d2)
    if kernel == "rbf-mixture":
        ks = [torch.exp(-d2 / (s * c)) for s in _RBF_SCALES]
        return sum(ks) / len(_RBF_SCALES)
    if kernel == "gaussian-unit":
        return torch.exp(-d2)
    raise LossError(f"unknown kernel {kernel!r}")


def mmd_loss(codes: torch.Tensor, prior_samples: torch.Tensor,
             kernel: str = "imq", prior_std: float = 1.0) -> torch.Tensor:
    """Unbiased maximum-mean-discrepancy estimate between the batch of color
    codes and fresh prior draws:

        (1/(n^2-n)) [sum_{l!=j} k(m_l, m_j) + sum_{l!=j} k(z_l, z_j)]
        - (2/n^2) sum_{l,j} k(m_l, z_j)

    May be negative; requires n >= 2.
    """
    if codes.ndim != 2 or prior_samples.ndim != 2:
        raise LossError("codes and prior samples must be n x K matrices")
    if codes.shape != prior_samples.shape:
        raise LossError(
            f"codes {tuple(codes.shape)} and prior {tuple(prior_samples.shape)} differ")
    n = codes.shape[0]
    if n < 2:
        raise LossError("the unbiased estimator needs at least 2 samples")
    k_mm = kernel_matrix(codes, codes, kernel, prior_std)
    k_zz = kernel_matrix(prior_samples, prior_samples, kernel, prior_std)
    k_mz = kernel_matrix(codes, prior_samples, kernel, prior_std)
    off_diag = (k_mm.sum() - k_mm.diagonal().sum()
                + k_zz.sum() - k_zz.diagonal().sum())
    return off_diag / (n * n - n) - 2.0 * k_mz.sum() / (n * n)


def _scalar(value) -> float:
    if torch.is_tensor(value):
        return float(value.detach())
    return float(value)


@dataclass
class LossReport:
    """One training step's named scalars plus the weighted totals."""

    L_m: float
    L_r_xy: float
    L_r_cc: float
    L_r_ss: float
    L_G_x: float
    L_G_y: float
    L_D_x: float
    L_D_y: float
    total_generator: float
    total_discriminator: float
    L_cc: Optional[float] = None

    def to_json(self) -> str:
        d = {k: v for k, v in self.__dict__.items() if v is not None}
        return json.dumps(d, sort_keys=True)


def total_losses(*, L_m, L_r_xy, L_r_cc, L_r_ss, L_G_x, L_G_y, L_D_x, L_D_y,
                 L_cc=None, cfg: TrainConfig):
    """Combine the named terms into the generator and discriminator totals.

    Accepts tensors (training) or floats (replay); returns the two totals in
    the input arithmetic plus a detached LossReport. The code-distribution
    term participates only when the config enables it.
    """
    parts = {"L_m": L_m, "L_r_xy": L_r_xy, "L_r_cc": L_r_cc, "L_r_ss": L_r_ss,
             "L_G_x": L_G_x, "L_G_y": L_G_y, "L_D_x": L_D_x, "L_D_y": L_D_y}
    if cfg.mmd_enabled:
        if L_cc is None:
            raise LossError("mmd is enabled but no L_cc term was supplied")
        parts["L_cc"] = L_cc
    for name, value in parts.items():
        if not math.isfinite(_scalar(value)):
            raise LossError(f"non-finite loss term {name}")
    total_gen = (L_G_x + L_G_y
                 + cfg.lambda1 * (L_m + L_r_xy)
                 + cfg.lambda2 * (L_r_cc + L_r_ss))
    if cfg.mmd_enabled:
        total_gen = total_gen + cfg.lambda3 * L_cc
    total_disc = L_D_x + L_D_y
    report = LossReport(
        L_m=_scalar(L_m), L_r_xy=_scalar(L_r_xy), L_r_cc=_scalar(L_r_cc),
        L_r_ss=_scalar(L_r_ss), L_G_x=_scalar(L_G_x), L_G_y=_scalar(L_G_y),
        L_D_x=_scalar(L_D_x), L_D_y=_scalar(L_D_y),
        total_generator=_scalar(total_gen), total_discriminator=_scalar(total_disc),
        L_cc=_scalar(L_cc) if cfg.mmd_enabled else None,
    )
    return total_gen, total_disc, report
