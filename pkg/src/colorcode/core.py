"""Shared value types, configuration, and image normalization.

All images flow through the pipeline as 3-channel float tensors in [-1, 1]
(the enhancement decoder ends in tanh). 8-bit I/O happens only at the
normalize/denormalize boundary.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
import numpy as np
import torch


class DomainError(ValueError):
    """Invalid value for one of the domain types."""


class ConfigError(ValueError):
    """Training configuration violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid config: " + "; ".join(self.violations))


def _check_finite(t: torch.Tensor, what: str) -> None:
    if not torch.isfinite(t).all():
        raise DomainError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class ImageTensor:
    """A 3xHxW float image in [-1, 1], spatial dims divisible by 4."""

    data: torch.Tensor

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[0] != 3:
            raise DomainError(f"image must be 3xHxW, got shape {tuple(d.shape)}")
        _check_finite(d, "image")
        if d.min() < -1.0 or d.max() > 1.0:
            raise DomainError("image values must lie in [-1, 1]")
        _, h, w = d.shape
        if h % 4 != 0 or w % 4 != 0:
            raise DomainError(f"image dims must be divisible by 4, got {h}x{w}")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ColorCode:
    """Length-K_m vector carrying the color semantics of one image."""

    values: torch.Tensor

    def __post_init__(self):
        if self.values.ndim != 1:
            raise DomainError(f"color code must be 1-D, got shape {tuple(self.values.shape)}")
        _check_finite(self.values, "color code")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class StyleCode:
    """Length-K_m auxiliary vector used only inside cross-reconstruction training."""

    values: torch.Tensor

    def __post_init__(self):
        if self.values.ndim != 1:
            raise DomainError(f"style code must be 1-D, got shape {tuple(self.values.shape)}")
        _check_finite(self.values, "style code")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ContentCode:
    """K_c x H/4 x W/4 feature map carrying structure and texture."""

    values: torch.Tensor
    source_height: int
    source_width: int

    def __post_init__(self):
        v = self.values
        if v.ndim != 3:
            raise DomainError(f"content code must be 3-D, got shape {tuple(v.shape)}")
        _check_finite(v, "content code")
        if v.shape[1] * 4 != self.source_height or v.shape[2] * 4 != self.source_width:
            raise DomainError(
                f"content code spatial dims {v.shape[1]}x{v.shape[2]} are not one quarter "
                f"of source {self.source_height}x{self.source_width}"
            )


_KERNELS = ("imq", "rbf-mixture")

_CONFIG_FIELDS = (
    "lambda1", "lambda2", "lambda3", "learning_rate", "adam_beta1", "adam_beta2",
    "code_length", "prior_mean", "prior_std", "mmd_enabled", "kernel",
    "truncation_tau", "image_size", "batch_size", "total_iterations", "seed",
)


@dataclass(frozen=True)
class TrainConfig:
    """Every training hyperparameter, with defaults for the supervised setup."""

    lambda1: float = 10.0
    lambda2: float = 1.0
    lambda3: float = 10.0
    learning_rate: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    code_length: int = 8
    prior_mean: float = 0.0
    prior_std: float = 1.0
    mmd_enabled: bool = True
    kernel: str = "imq"
    truncation_tau: float = 2.0
    image_size: int = 256
    batch_size: int = 8
    total_iterations: int = 80_000
    seed: int = 0

    def replace(self, **kwargs) -> "TrainConfig":
        return dataclasses.replace(self, **kwargs)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "TrainConfig":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ConfigError(["config document must be a JSON object"])
        unknown = sorted(set(raw) - set(_CONFIG_FIELDS))
        if unknown:
            raise ConfigError([f"unknown key '{k}'" for k in unknown])
        cfg = TrainConfig(**raw)
        return validate_config(cfg)


def validate_config(cfg: TrainConfig) -> TrainConfig:
    """Return cfg unchanged if every invariant holds, else raise ConfigError
    listing each violated field."""
    v = []
    for name in ("lambda1", "lambda2", "lambda3"):
        if getattr(cfg, name) < 0:
            v.append(f"{name} not non-negative")
    if cfg.learning_rate <= 0:
        v.append("learning_rate not positive")
    for name in ("adam_beta1", "adam_beta2"):
        b = getattr(cfg, name)
        if not (0.0 < b < 1.0):
            v.append(f"{name} not in (0, 1)")
    if cfg.code_length < 1:
        v.append("code_length not positive")
    if cfg.prior_std <= 0:
        v.append("prior_std not positive")
    if cfg.kernel not in _KERNELS:
        v.append(f"kernel not one of {_KERNELS}")
    if cfg.truncation_tau <= 0:
        v.append("truncation_tau not positive")
    if cfg.image_size < 4:
        v.append("image_size not positive")
    if cfg.image_size % 4 != 0:
        v.append("image_size not divisible by 4")
    if cfg.batch_size < 1:
        v.append("batch_size not positive")
    if cfg.total_iterations < 0:
        v.append("total_iterations negative")
    for name in ("lambda1", "lambda2", "lambda3", "learning_rate", "adam_beta1",
                 "adam_beta2", "prior_mean", "prior_std", "truncation_tau"):
        if not np.isfinite(getattr(cfg, name)):
            v.append(f"{name} not finite")
    if v:
        raise ConfigError(v)
    return cfg


def normalize_image(raw: np.ndarray) -> ImageTensor:
    """Map an 8-bit HxWx3 or 3xHxW image onto [-1, 1] as raw/127.5 - 1."""
    arr = np.asarray(raw)
    if arr.ndim != 3:
        raise DomainError(f"expected a 3-channel image, got {arr.ndim} dims")
    if arr.shape[-1] == 3 and arr.shape[0] != 3:
        arr = np.moveaxis(arr, -1, 0)
    if arr.shape[0] != 3:
        raise DomainError(f"expected 3 channels, got shape {tuple(raw.shape)}")
    if arr.min() < 0 or arr.max() > 255:
        raise DomainError("8-bit image values must lie in [0, 255]")
    data = torch.from_numpy(arr.astype(np.float32) / 127.5 - 1.0)
    return ImageTensor(data)


def denormalize_image(img: ImageTensor) -> np.ndarray:
    """Map [-1, 1] back to 8-bit HxWx3 with round-half-up and clamping."""
    data = img.data.detach().cpu().to(torch.float64).numpy()
    out = np.floor((data + 1.0) * 127.5 + 0.5)
    out = np.clip(out, 0, 255).astype(np.uint8)
    return np.moveaxis(out, 0, -1)


def denormalize_batch(batch: torch.Tensor) -> np.ndarray:
    """Denormalize a Bx3xHxW tensor (values clamped into range first)."""
    data = batch.detach().cpu().clamp(-1.0, 1.0).to(torch.float64).numpy()
    out = np.floor((data + 1.0) * 127.5 + 0.5)
    return np.moveaxis(np.clip(out, 0, 255).astype(np.uint8), 1, -1)
