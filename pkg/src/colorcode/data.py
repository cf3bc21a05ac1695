"""Paired dataset ingestion, deterministic batching, guidance pools, and
checkpoint persistence.

Datasets live on disk as root/input/ + root/gt/ with pairs matched by
relative filename (a manifest.json of {input, gt} entries can override).
Batching is a pure function of (seed, iteration) so an interrupted run
resumes on exactly the batch sequence it would have seen.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from PIL import Image

from colorcode.core import TrainConfig
from colorcode.networks import NetworkBundle
from colorcode.training import TrainState, init_train_state

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
CHECKPOINT_FORMAT = 1


class DataError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class PairedDataset:
    root: Path
    pairs: List[Tuple[Path, Path]]
    split: str
    warnings: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)


def _relative_images(base: Path) -> Dict[str, Path]:
    return {
        str(p.relative_to(base)): p
        for p in sorted(base.rglob("*"))
        if p.suffix.lower() in IMAGE_SUFFIXES
    }


def load_paired_dataset(root, split: str = "train") -> PairedDataset:
    """Pair input/ and gt/ images by identical relative filename."""
    root = Path(root)
    if split not in ("train", "test"):
        raise DataError(f"split must be 'train' or 'test', got {split!r}")
    manifest = root / "manifest.json"
    warnings: List[str] = []
    pairs: List[Tuple[Path, Path]] = []
    if manifest.exists():
        entries = json.loads(manifest.read_text())
        for entry in entries:
            inp, gt = root / entry["input"], root / entry["gt"]
            if inp.exists() and gt.exists():
                pairs.append((inp, gt))
            else:
                warnings.append(f"manifest entry missing on disk: {entry}")
        pairs.sort()
    else:
        inp_dir, gt_dir = root / "input", root / "gt"
        if not inp_dir.is_dir() or not gt_dir.is_dir():
            raise DataError(f"{root} must contain input/ and gt/ subdirectories")
        inputs = _relative_images(inp_dir)
        gts = _relative_images(gt_dir)
        for name in sorted(set(inputs) | set(gts)):
            if name in inputs and name in gts:
                pairs.append((inputs[name], gts[name]))
            else:
                side = "input" if name in inputs else "gt"
                warnings.append(f"unpaired file in {side}/: {name}")
    for w in warnings:
        log.warning("%s", w)
    if not pairs:
        raise DataError(f"no image pairs found under {root}")
    return PairedDataset(root=root, pairs=pairs, split=split, warnings=warnings)


def _load_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def _resize_short_side(arr: np.ndarray, size: int) -> np.ndarray:
    h, w = arr.shape[:2]
    if min(h, w) == size:
        return arr
    if h < w:
        new_h, new_w = size, max(size, round(w * size / h))
    else:
        new_h, new_w = max(size, round(h * size / w)), size
    img = Image.fromarray(arr).resize((new_w, new_h), Image.BICUBIC)
    return np.asarray(img)


def _to_tensor(arr: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.moveaxis(arr, -1, 0).astype(np.float32) / 127.5 - 1.0)


class BatchSchedule:
    """Deterministic, resumable stream of augmented paired batches.

    Pair order reshuffles every epoch from the run seed; crops and flips are
    drawn per iteration, and each pair receives one shared geometric
    transform. Partial final batches are kept.
    """

    def __init__(self, dataset: PairedDataset, cfg: TrainConfig):
        if len(dataset) == 0:
            raise DataError("dataset is empty")
        self.dataset = dataset
        self.cfg = cfg
        self.batches_per_epoch = -(-len(dataset) // cfg.batch_size)

    def _epoch_order(self, epoch: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([self.cfg.seed, 1, epoch]))
        return rng.permutation(len(self.dataset))

    def epoch_pair_indices(self, epoch: int) -> List[np.ndarray]:
        order = self._epoch_order(epoch)
        bs = self.cfg.batch_size
        return [order[i:i + bs] for i in range(0, len(order), bs)]

    def batch(self, iteration: int) -> Tuple[torch.Tensor, torch.Tensor]:
        epoch, slot = divmod(iteration, self.batches_per_epoch)
        indices = self.epoch_pair_indices(epoch)[slot]
        rng = np.random.default_rng(np.random.SeedSequence([self.cfg.seed, 2, iteration]))
        xs, ys = [], []
        for idx in indices:
            inp_path, gt_path = self.dataset.pairs[int(idx)]
            try:
                x = _load_rgb(inp_path)
                y = _load_rgb(gt_path)
            except Exception as err:  # undecodable file: skip, keep training
                log.warning("skipping unreadable pair %s: %s", inp_path.name, err)
                continue
            x, y = self._augment_pair(x, y, rng)
            xs.append(_to_tensor(x))
            ys.append(_to_tensor(y))
        if not xs:
            raise DataError(f"every file in the batch at iteration {iteration} was unreadable")
        return torch.stack(xs), torch.stack(ys)

    def _augment_pair(self, x, y, rng):
        size = self.cfg.image_size
        x = _resize_short_side(x, size)
        y = _resize_short_side(y, size)
        h, w = x.shape[:2]
        if y.shape[:2] != (h, w):
            y = np.asarray(Image.fromarray(y).resize((w, h), Image.BICUBIC))
        if self.dataset.split == "train":
            top = int(rng.integers(0, h - size + 1))
            left = int(rng.integers(0, w - size + 1))
            flip = bool(rng.integers(0, 2))
        else:
            top, left, flip = (h - size) // 2, (w - size) // 2, False
        x = x[top:top + size, left:left + size]
        y = y[top:top + size, left:left + size]
        if flip:
            x, y = x[:, ::-1], y[:, ::-1]
        return np.ascontiguousarray(x), np.ascontiguousarray(y)


def make_batches(dataset: PairedDataset, cfg: TrainConfig) -> BatchSchedule:
    return BatchSchedule(dataset, cfg)


@dataclass
class GuidancePool:
    """Directory of candidate guidance images with an optional per-image
    suitability score (mean hue shift under the enhancement path)."""

    root: Path
    names: List[str]
    suitability: Optional[Dict[str, float]] = None

    @staticmethod
    def open(root) -> "GuidancePool":
        root = Path(root)
        names = sorted(p.name for p in root.iterdir()
                       if p.suffix.lower() in IMAGE_SUFFIXES)
        if not names:
            raise DataError(f"guidance pool {root} holds no images")
        suitability = None
        sidecar = root / "suitability.json"
        if sidecar.exists():
            suitability = json.loads(sidecar.read_text())
        return GuidancePool(root=root, names=names, suitability=suitability)

    def load(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise DataError(f"guidance {name!r} not in pool ({len(self.names)} entries)")
        return _load_rgb(self.root / name)

    def write_suitability(self, scores: Dict[str, float]) -> None:
        (self.root / "suitability.json").write_text(json.dumps(scores, indent=2))
        self.suitability = dict(scores)


# --- checkpoint persistence ---


def _tensor_bytes(obj) -> bytes:
    buf = io.BytesIO()
    torch.save(obj, buf)
    return buf.getvalue()


def _digest(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(state: TrainState, path) -> str:
    """Write the bundle, optimizer states and rng into one digest-verified
    archive; returns the manifest digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blobs: Dict[str, bytes] = {}
    for name, net in state.bundle.networks.items():
        blobs[f"networks/{name}.pt"] = _tensor_bytes(net.state_dict())
    blobs["training/gen_opt.pt"] = _tensor_bytes(state.gen_opt.state_dict())
    blobs["training/dis_opt.pt"] = _tensor_bytes(state.dis_opt.state_dict())
    blobs["training/rng.pt"] = _tensor_bytes(state.rng.get_state())
    manifest = {
        "format_version": CHECKPOINT_FORMAT,
        "config": json.loads(state.config.to_json()),
        "base_channels": state.bundle.base_channels,
        "iteration": state.iteration,
        "digests": {k: _digest(v) for k, v in blobs.items()},
    }
    manifest_bytes = json.dumps(manifest, indent=2, sort_keys=True).encode()
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", manifest_bytes)
        for key, blob in blobs.items():
            zf.writestr(key, blob)
    return _digest(manifest_bytes)


def read_manifest(path) -> dict:
    with zipfile.ZipFile(path) as zf:
        return json.loads(zf.read("manifest.json"))


def checkpoint_digest(path) -> str:
    with zipfile.ZipFile(path) as zf:
        return _digest(zf.read("manifest.json"))


def _verify_and_read(zf: zipfile.ZipFile, manifest: dict, key: str) -> bytes:
    blob = zf.read(key)
    want = manifest["digests"][key]
    got = _digest(blob)
    if got != want:
        raise CheckpointError(f"digest mismatch for {key}: {got} != {want}")
    return blob


def _check_config(manifest: dict, expected: Optional[TrainConfig]) -> TrainConfig:
    stored = TrainConfig(**manifest["config"])
    if expected is not None and stored != expected:
        raise CheckpointError(
            "checkpoint config does not match the requested config\n"
            f"  checkpoint: {manifest['config']}\n"
            f"  requested:  {json.loads(expected.to_json())}")
    return stored


def load_bundle(path, expected_config: Optional[TrainConfig] = None
                ) -> Tuple[NetworkBundle, TrainConfig, str]:
    """Restore just the networks (inference use); returns the manifest digest."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format_version") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"unsupported checkpoint format {manifest.get('format_version')}")
        cfg = _check_config(manifest, expected_config)
        bundle = NetworkBundle(cfg, base_channels=manifest["base_channels"])
        for name, net in bundle.networks.items():
            blob = _verify_and_read(zf, manifest, f"networks/{name}.pt")
            net.load_state_dict(torch.load(io.BytesIO(blob)))
        digest = _digest(zf.read("manifest.json"))
    bundle.eval()
    return bundle, cfg, digest


def load_checkpoint(path, expected_config: Optional[TrainConfig] = None) -> TrainState:
    """Restore a full training state: parameters bit-exact, optimizer moments
    and rng stream included."""
    path = Path(path)
    bundle, cfg, _ = load_bundle(path, expected_config)
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        state = init_train_state(cfg, base_channels=manifest["base_channels"])
        state.bundle = bundle
        state.gen_opt = torch.optim.Adam(bundle.generator_parameters(), lr=cfg.learning_rate,
                                         betas=(cfg.adam_beta1, cfg.adam_beta2))
        state.dis_opt = torch.optim.Adam(bundle.discriminator_parameters(), lr=cfg.learning_rate,
                                         betas=(cfg.adam_beta1, cfg.adam_beta2))
        state.gen_opt.load_state_dict(
            torch.load(io.BytesIO(_verify_and_read(zf, manifest, "training/gen_opt.pt"))))
        state.dis_opt.load_state_dict(
            torch.load(io.BytesIO(_verify_and_read(zf, manifest, "training/dis_opt.pt"))))
        state.rng.set_state(
            torch.load(io.BytesIO(_verify_and_read(zf, manifest, "training/rng.pt"))))
        state.iteration = manifest["iteration"]
    bundle.train()
    return state
