"""The three inference functions: fixed enhancement, guidance-weighted color
adaptation, and prior-sampled color interpolation, plus the code fusion and
truncation primitives they share.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import torch

from colorcode.core import ImageTensor, TrainConfig
from colorcode.networks import NetworkBundle


class InferenceError(ValueError):
    pass


def truncate(v: torch.Tensor, tau: float) -> torch.Tensor:
    """Elementwise clamp into [-tau, tau], keeping a guidance or sampled code
    inside the prior's high-density region."""
    if tau <= 0:
        raise InferenceError("truncation bound must be positive")
    return v.clamp(-tau, tau)


def fuse_codes(m_x: torch.Tensor, m_g: torch.Tensor, alpha: float,
               tau: float = 2.0) -> torch.Tensor:
    """Normalized blend of two color codes:

        ((1 - alpha) * m_x + alpha * truncate(m_g)) / sqrt((1-alpha)^2 + alpha^2)

    alpha=0 returns m_x exactly; alpha=1 returns the truncated guidance code.
    """
    if not (0.0 <= alpha <= 1.0):
        raise InferenceError(f"alpha must lie in [0, 1], got {alpha}")
    if m_x.shape != m_g.shape:
        raise InferenceError(f"code shapes differ: {tuple(m_x.shape)} vs {tuple(m_g.shape)}")
    num = (1.0 - alpha) * m_x + alpha * truncate(m_g, tau)
    den = float(np.sqrt((1.0 - alpha) ** 2 + alpha ** 2))
    return num / den


@dataclass(frozen=True)
class AdaptationRequest:
    x: ImageTensor
    guidance: ImageTensor
    alpha: float
    mask: Optional[torch.Tensor] = None

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise InferenceError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.mask is not None:
            if self.mask.shape != (self.x.height, self.x.width):
                raise InferenceError(
                    f"mask shape {tuple(self.mask.shape)} does not match image "
                    f"{self.x.height}x{self.x.width}")


@dataclass(frozen=True)
class InterpolationRequest:
    x: ImageTensor
    z: torch.Tensor
    alpha: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise InferenceError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.z.ndim != 1:
            raise InferenceError("sampled code must be a 1-D vector")


@dataclass
class CodeGrid:
    """Row-major interpolation grid: rows step the first code dimension,
    columns the second. center marks the cell whose sampled code is the zero
    vector, when it falls on the grid."""

    images: List[List[ImageTensor]]
    z_values: List[List[Tuple[float, float]]]
    center: Optional[Tuple[int, int]]


class InferenceSession:
    """Read-only wrapper over a trained bundle; safe to share across
    concurrent requests."""

    def __init__(self, bundle: NetworkBundle, config: TrainConfig):
        self.bundle = bundle
        self.config = config
        bundle.eval()

    @staticmethod
    def from_checkpoint(path) -> "InferenceSession":
        from colorcode.data import load_bundle
        bundle, cfg, digest = load_bundle(path)
        session = InferenceSession(bundle, cfg)
        session.checkpoint_digest = digest
        return session

    def _encode(self, img: ImageTensor):
        x = img.data.unsqueeze(0)
        with torch.no_grad():
            return self.bundle.encode_content(x, "x"), self.bundle.encode_color(x)

    def _decode(self, c: torch.Tensor, m: torch.Tensor) -> ImageTensor:
        with torch.no_grad():
            out = self.bundle.decode_enhance(c, m)
        return ImageTensor(out.squeeze(0))

    def encode_color(self, img: ImageTensor) -> torch.Tensor:
        with torch.no_grad():
            return self.bundle.encode_color(img.data.unsqueeze(0)).squeeze(0)

    def color_code(self, img: ImageTensor):
        from colorcode.core import ColorCode
        return ColorCode(self.encode_color(img))

    def content_code(self, img: ImageTensor):
        from colorcode.core import ContentCode
        with torch.no_grad():
            c = self.bundle.encode_content(img.data.unsqueeze(0), "x").squeeze(0)
        return ContentCode(c, source_height=img.height, source_width=img.width)

    def enhance(self, x: ImageTensor) -> ImageTensor:
        """Fixed color enhancement of a distorted image."""
        c, m = self._encode(x)
        return self._decode(c, m)

    def adapt(self, req: AdaptationRequest) -> ImageTensor:
        """Shift the enhanced colors toward a guidance image's color code.

        With a foreground mask, the adapted foreground is composited over the
        plain enhancement so the output stays a full image.
        """
        c_x, m_x = self._encode(req.x)
        m_g = self.bundle.encode_color(req.guidance.data.unsqueeze(0))
        fused = fuse_codes(m_x, m_g, req.alpha, self.config.truncation_tau)
        adapted = self._decode(c_x, fused)
        if req.mask is None:
            return adapted
        base = self._decode(c_x, m_x)
        mask = req.mask.to(adapted.data.dtype)
        keep = mask.unsqueeze(0) > 0.5
        return ImageTensor(torch.where(keep, adapted.data, base.data))

    def interpolate(self, req: InterpolationRequest) -> ImageTensor:
        """Enhance with the image's code fused against a sampled prior code."""
        if req.z.shape[0] != self.config.code_length:
            raise InferenceError(
                f"sampled code length {req.z.shape[0]} does not match the model "
                f"({self.config.code_length})")
        c_x, m_x = self._encode(req.x)
        fused = fuse_codes(m_x, req.z.to(m_x.dtype).unsqueeze(0), req.alpha,
                           self.config.truncation_tau)
        return self._decode(c_x, fused)

    def interpolation_grid(self, x: ImageTensor, steps: int,
                           value_range: Tuple[float, float] = (-5.0, 5.0),
                           alpha: float = 0.5) -> CodeGrid:
        """steps x steps interpolations over an equally spaced 2-D code grid
        (requires a model trained with a 2-D color code)."""
        if self.config.code_length != 2:
            raise InferenceError(
                f"grid mode needs a 2-D color code, this model has "
                f"{self.config.code_length}; use interpolate() with a single code")
        if steps < 1:
            raise InferenceError("steps must be >= 1")
        lo, hi = value_range
        if steps == 1:
            values = [0.5 * (lo + hi)]
        else:
            values = [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]
        c_x, m_x = self._encode(x)
        images, zs = [], []
        center = None
        for i, z1 in enumerate(values):
            row_imgs, row_zs = [], []
            for j, z2 in enumerate(values):
                z = torch.tensor([z1, z2], dtype=m_x.dtype)
                fused = fuse_codes(m_x, z.unsqueeze(0), alpha, self.config.truncation_tau)
                row_imgs.append(self._decode(c_x, fused))
                row_zs.append((z1, z2))
                if z1 == 0.0 and z2 == 0.0:
                    center = (i, j)
            images.append(row_imgs)
            zs.append(row_zs)
        return CodeGrid(images=images, z_values=zs, center=center)

    def guidance_hue_shift(self, g: ImageTensor) -> float:
        """Mean hue drift of a candidate guidance through the enhancement
        path (diagnostic only; low drift suggests usable long-wavelength
        guidance)."""
        enhanced = self.enhance(g)
        return mean_hue_shift(g, enhanced)


def _hue_degrees(data: torch.Tensor) -> Tuple[np.ndarray, np.ndarray]:
    rgb = ((data.detach().cpu().numpy() + 1.0) / 2.0).clip(0.0, 1.0)
    r, g, b = rgb[0], rgb[1], rgb[2]
    mx = np.max(rgb, axis=0)
    mn = np.min(rgb, axis=0)
    delta = mx - mn
    hue = np.zeros_like(mx)
    nz = delta > 1e-6
    rmax = nz & (mx == r)
    gmax = nz & (mx == g) & ~rmax
    bmax = nz & ~rmax & ~gmax
    hue[rmax] = 60.0 * (((g - b)[rmax] / delta[rmax]) % 6.0)
    hue[gmax] = 60.0 * ((b - r)[gmax] / delta[gmax] + 2.0)
    hue[bmax] = 60.0 * ((r - g)[bmax] / delta[bmax] + 4.0)
    saturated = nz & (mx > 0.05)
    return hue, saturated


def score_guidance_pool(session: InferenceSession, pool) -> dict:
    """Hue-drift suitability for every image in a guidance pool; the scores
    are written back to the pool's sidecar. Lower drift means the colors
    survive the enhancement path and make steadier guidance."""
    from colorcode.core import normalize_image

    scores = {}
    for name in pool.names:
        arr = pool.load(name)
        h, w = arr.shape[:2]
        arr = arr[: h - h % 4, : w - w % 4]
        scores[name] = session.guidance_hue_shift(normalize_image(arr))
    pool.write_suitability(scores)
    return scores


def mean_hue_shift(before: ImageTensor, after: ImageTensor) -> float:
    """Mean circular hue distance in degrees over pixels with defined hue."""
    hue_a, sat_a = _hue_degrees(before.data)
    hue_b, sat_b = _hue_degrees(after.data)
    valid = sat_a & sat_b
    if not valid.any():
        return 0.0
    diff = np.abs(hue_a[valid] - hue_b[valid])
    diff = np.minimum(diff, 360.0 - diff)
    return float(diff.mean())
