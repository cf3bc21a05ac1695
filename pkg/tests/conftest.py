import numpy as np
import pytest
import torch
from PIL import Image

from colorcode.core import TrainConfig

TOY_WIDTH = 8  # narrow bundle so CPU smoke runs stay fast


def toy_config(**overrides) -> TrainConfig:
    base = dict(image_size=64, batch_size=4, code_length=8, seed=7,
                total_iterations=10)
    base.update(overrides)
    return TrainConfig(**base)


def smooth_image(rng: np.random.Generator, size: int = 64) -> np.ndarray:
    """Low-frequency random color field, uint8 HxWx3."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size, 3))
    for c in range(3):
        fx, fy = rng.uniform(0.5, 2.5, size=2)
        px, py = rng.uniform(0, 2 * np.pi, size=2)
        amp = rng.uniform(0.25, 0.5)
        img[..., c] = 0.5 + amp * np.sin(2 * np.pi * fx * xx + px) * np.cos(2 * np.pi * fy * yy + py)
    tint = rng.uniform(0.4, 1.0, size=3)
    img = img * tint
    return np.clip(img * 255, 0, 255).astype(np.uint8)


def underwater_distort(reference: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Attenuate long wavelengths and add a blue-green cast."""
    img = reference.astype(np.float64) / 255.0
    atten = np.array([rng.uniform(0.2, 0.45), rng.uniform(0.6, 0.85), rng.uniform(0.8, 1.0)])
    cast = np.array([0.0, rng.uniform(0.03, 0.1), rng.uniform(0.05, 0.15)])
    out = img * atten + cast
    return np.clip(out * 255, 0, 255).astype(np.uint8)


def write_pair_dataset(root, n_pairs: int, size: int = 64, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    (root / "input").mkdir(parents=True)
    (root / "gt").mkdir(parents=True)
    for i in range(n_pairs):
        ref = smooth_image(rng, size)
        dist = underwater_distort(ref, rng)
        Image.fromarray(dist).save(root / "input" / f"img_{i:03d}.png")
        Image.fromarray(ref).save(root / "gt" / f"img_{i:03d}.png")


def write_diverse_pair_dataset(root, n_pairs: int, size: int = 64, seed: int = 0) -> None:
    """Pairs whose distortion severity spans barely-touched to heavy cast,
    giving the color encoder a wide spread of color statistics."""
    rng = np.random.default_rng(seed)
    (root / "input").mkdir(parents=True)
    (root / "gt").mkdir(parents=True)
    for i in range(n_pairs):
        ref = smooth_image(rng, size)
        img = ref.astype(np.float64) / 255.0
        severity = rng.uniform(0.0, 1.0)
        atten = 1.0 - severity * rng.uniform(0.3, 0.8, 3) * np.array(
            [1.0, rng.uniform(0.1, 0.6), rng.uniform(0.0, 0.4)])
        cast = severity * np.array([0.0, rng.uniform(0.0, 0.12), rng.uniform(0.0, 0.18)])
        x = np.clip(img * atten + cast, 0, 1)
        Image.fromarray((x * 255).astype(np.uint8)).save(root / "input" / f"img_{i:03d}.png")
        Image.fromarray(ref).save(root / "gt" / f"img_{i:03d}.png")


@pytest.fixture
def pair_dataset_dir(tmp_path):
    root = tmp_path / "ds"
    write_pair_dataset(root, n_pairs=6, seed=3)
    return root


def random_image_tensor(seed: int = 0, size: int = 64):
    from colorcode.core import ImageTensor
    g = torch.Generator().manual_seed(seed)
    return ImageTensor((torch.rand(3, size, size, generator=g) * 2 - 1).clamp(-1, 1))
