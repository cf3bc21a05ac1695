import json

import numpy as np
import pytest
import torch
from PIL import Image

from colorcode.data import (CheckpointError, DataError, GuidancePool,
                            checkpoint_digest, load_bundle, load_checkpoint,
                            load_paired_dataset, make_batches, save_checkpoint)
from colorcode.training import init_train_state, train_step
from conftest import TOY_WIDTH, toy_config, write_pair_dataset


def coord_image(size=96):
    """Image whose pixels encode their own coordinates (for transform checks)."""
    yy, xx = np.mgrid[0:size, 0:size]
    img = np.zeros((size, size, 3), np.uint8)
    img[..., 0] = (yy * 255 // size)
    img[..., 1] = (xx * 255 // size)
    img[..., 2] = 128
    return img


class TestLoadPairedDataset:
    def test_matched_pairs_sorted(self, tmp_path):
        write_pair_dataset(tmp_path / "ds", n_pairs=10)
        ds = load_paired_dataset(tmp_path / "ds")
        assert len(ds) == 10
        names = [p[0].name for p in ds.pairs]
        assert names == sorted(names)
        assert ds.warnings == []

    def test_orphan_produces_warning(self, tmp_path):
        root = tmp_path / "ds"
        write_pair_dataset(root, n_pairs=10)
        (root / "gt" / "img_009.png").unlink()
        ds = load_paired_dataset(root)
        assert len(ds) == 9
        assert len(ds.warnings) == 1
        assert "img_009" in ds.warnings[0]

    def test_empty_root_rejected(self, tmp_path):
        (tmp_path / "ds" / "input").mkdir(parents=True)
        (tmp_path / "ds" / "gt").mkdir()
        with pytest.raises(DataError, match="no image pairs"):
            load_paired_dataset(tmp_path / "ds")

    def test_missing_layout_rejected(self, tmp_path):
        with pytest.raises(DataError, match="input/ and gt/"):
            load_paired_dataset(tmp_path)

    def test_manifest_override(self, tmp_path):
        root = tmp_path / "ds"
        write_pair_dataset(root, n_pairs=3)
        manifest = [{"input": "input/img_000.png", "gt": "gt/img_000.png"},
                    {"input": "input/img_002.png", "gt": "gt/img_002.png"}]
        (root / "manifest.json").write_text(json.dumps(manifest))
        ds = load_paired_dataset(root)
        assert len(ds) == 2


class TestBatches:
    def test_partial_final_batch_kept(self, tmp_path):
        write_pair_dataset(tmp_path / "ds", n_pairs=10)
        ds = load_paired_dataset(tmp_path / "ds")
        schedule = make_batches(ds, toy_config(batch_size=8))
        sizes = [len(idx) for idx in schedule.epoch_pair_indices(0)]
        assert sizes == [8, 2]
        x, y = schedule.batch(1)
        assert x.shape[0] == 2 and y.shape[0] == 2

    def test_fixed_seed_identical_order(self, tmp_path):
        write_pair_dataset(tmp_path / "ds", n_pairs=10)
        ds = load_paired_dataset(tmp_path / "ds")
        cfg = toy_config(batch_size=4, seed=5)
        a = make_batches(ds, cfg)
        b = make_batches(ds, cfg)
        for i in range(5):
            xa, ya = a.batch(i)
            xb, yb = b.batch(i)
            assert torch.equal(xa, xb) and torch.equal(ya, yb)

    def test_epochs_reshuffle(self, tmp_path):
        write_pair_dataset(tmp_path / "ds", n_pairs=10)
        ds = load_paired_dataset(tmp_path / "ds")
        schedule = make_batches(ds, toy_config(batch_size=4, seed=5))
        orders = [tuple(np.concatenate(schedule.epoch_pair_indices(e))) for e in range(4)]
        assert len(set(orders)) > 1

    def test_paired_transform_identical(self, tmp_path):
        root = tmp_path / "ds"
        (root / "input").mkdir(parents=True)
        (root / "gt").mkdir()
        img = coord_image(96)
        Image.fromarray(img).save(root / "input" / "a.png")
        Image.fromarray(img).save(root / "gt" / "a.png")
        ds = load_paired_dataset(root)
        schedule = make_batches(ds, toy_config(batch_size=1, image_size=64, seed=2))
        for i in range(6):
            x, y = schedule.batch(i)
            assert torch.equal(x, y)  # same crop + same flip on both sides

    def test_train_crops_vary_test_center(self, tmp_path):
        root = tmp_path / "ds"
        (root / "input").mkdir(parents=True)
        (root / "gt").mkdir()
        img = coord_image(96)
        Image.fromarray(img).save(root / "input" / "a.png")
        Image.fromarray(img).save(root / "gt" / "a.png")
        cfg = toy_config(batch_size=1, image_size=64, seed=2)
        train_sched = make_batches(load_paired_dataset(root, "train"), cfg)
        crops = {train_sched.batch(i)[0].numpy().tobytes() for i in range(8)}
        assert len(crops) > 1
        test_sched = make_batches(load_paired_dataset(root, "test"), cfg)
        assert torch.equal(test_sched.batch(0)[0], test_sched.batch(1)[0])


class TestGuidancePool:
    def test_open_and_load(self, tmp_path):
        pool_dir = tmp_path / "pool"
        pool_dir.mkdir()
        Image.fromarray(coord_image(64)).save(pool_dir / "g1.png")
        Image.fromarray(coord_image(64)).save(pool_dir / "g2.png")
        pool = GuidancePool.open(pool_dir)
        assert pool.names == ["g1.png", "g2.png"]
        assert pool.load("g1.png").shape == (64, 64, 3)
        with pytest.raises(DataError, match="not in pool"):
            pool.load("missing.png")

    def test_empty_pool_rejected(self, tmp_path):
        (tmp_path / "pool").mkdir()
        with pytest.raises(DataError, match="no images"):
            GuidancePool.open(tmp_path / "pool")

    def test_suitability_round_trip(self, tmp_path):
        pool_dir = tmp_path / "pool"
        pool_dir.mkdir()
        Image.fromarray(coord_image(64)).save(pool_dir / "g1.png")
        pool = GuidancePool.open(pool_dir)
        pool.write_suitability({"g1.png": 3.5})
        again = GuidancePool.open(pool_dir)
        assert again.suitability == {"g1.png": 3.5}


@pytest.mark.slow
class TestCheckpoints:
    def test_round_trip_bit_exact(self, tmp_path):
        cfg = toy_config(seed=23)
        state = init_train_state(cfg, base_channels=TOY_WIDTH)
        g = torch.Generator().manual_seed(0)
        batch = ((torch.rand(2, 3, 64, 64, generator=g) * 2 - 1),
                 (torch.rand(2, 3, 64, 64, generator=g) * 2 - 1))
        state, _ = train_step(state, batch)
        path = tmp_path / "ckpt.zip"
        save_checkpoint(state, path)
        restored = load_checkpoint(path)
        assert restored.iteration == 1
        for name in state.bundle.networks:
            for p0, p1 in zip(state.bundle.networks[name].parameters(),
                              restored.bundle.networks[name].parameters()):
                assert torch.equal(p0, p1)
        assert torch.equal(state.rng.get_state(), restored.rng.get_state())

    def test_corrupted_blob_rejected(self, tmp_path):
        import zipfile

        cfg = toy_config()
        state = init_train_state(cfg, base_channels=TOY_WIDTH)
        path = tmp_path / "ckpt.zip"
        save_checkpoint(state, path)
        # rewrite one network blob with garbage, keeping the manifest
        with zipfile.ZipFile(path) as zf:
            entries = {n: zf.read(n) for n in zf.namelist()}
        entries["networks/color_enc_x.pt"] = b"corrupted"
        with zipfile.ZipFile(path, "w") as zf:
            for name, blob in entries.items():
                zf.writestr(name, blob)
        with pytest.raises(CheckpointError, match="digest mismatch"):
            load_bundle(path)

    def test_config_mismatch_rejected(self, tmp_path):
        state = init_train_state(toy_config(code_length=8), base_channels=TOY_WIDTH)
        path = tmp_path / "ckpt.zip"
        save_checkpoint(state, path)
        with pytest.raises(CheckpointError, match="does not match"):
            load_checkpoint(path, expected_config=toy_config(code_length=2))

    def test_digest_stable(self, tmp_path):
        state = init_train_state(toy_config(), base_channels=TOY_WIDTH)
        save_checkpoint(state, tmp_path / "a.zip")
        assert len(checkpoint_digest(tmp_path / "a.zip")) == 64
