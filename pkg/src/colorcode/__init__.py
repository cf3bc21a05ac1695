"""Underwater image color enhancement via content/color code decomposition."""

from colorcode.core import (
    ColorCode,
    ConfigError,
    ContentCode,
    DomainError,
    ImageTensor,
    StyleCode,
    TrainConfig,
    denormalize_image,
    normalize_image,
    validate_config,
)

__all__ = [
    "ColorCode",
    "ConfigError",
    "ContentCode",
    "DomainError",
    "ImageTensor",
    "StyleCode",
    "TrainConfig",
    "denormalize_image",
    "normalize_image",
    "validate_config",
]

__version__ = "0.1.0"
