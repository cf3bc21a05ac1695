import json

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from colorcode.core import (ConfigError, DomainError, ImageTensor, TrainConfig,
                            denormalize_image, normalize_image, validate_config)


class TestNormalize:
    def test_endpoints(self):
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        assert normalize_image(img).data.min().item() == -1.0
        img[:] = 255
        assert normalize_image(img).data.max().item() == 1.0

    def test_mid_value(self):
        img = np.full((4, 4, 3), 128, dtype=np.uint8)
        got = normalize_image(img).data[0, 0, 0].item()
        assert got == pytest.approx(128 / 127.5 - 1, abs=1e-7)

    def test_wrong_channel_count(self):
        with pytest.raises(DomainError, match="channel"):
            normalize_image(np.zeros((4, 4, 4), dtype=np.uint8))

    def test_channel_first_accepted(self):
        img = np.zeros((3, 8, 8), dtype=np.uint8)
        assert normalize_image(img).data.shape == (3, 8, 8)


class TestDenormalize:
    def test_endpoints(self):
        t = ImageTensor(torch.full((3, 4, 4), -1.0))
        assert denormalize_image(t).max() == 0
        t = ImageTensor(torch.full((3, 4, 4), 1.0))
        assert denormalize_image(t).min() == 255

    def test_zero_rounds_half_up(self):
        t = ImageTensor(torch.zeros(3, 4, 4))
        assert denormalize_image(t)[0, 0, 0] == 128

    def test_round_trip_exhaustive(self):
        values = np.arange(256, dtype=np.uint8)
        img = np.tile(values.reshape(16, 16, 1), (1, 1, 3))
        img = np.vstack([img, img, img, img])  # 64x16, height divisible by 4
        back = denormalize_image(normalize_image(img))
        assert np.array_equal(back, img)


class TestImageTensor:
    def test_rejects_bad_divisibility(self):
        with pytest.raises(DomainError, match="divisible"):
            ImageTensor(torch.zeros(3, 30, 32))

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError, match="range|\\[-1, 1\\]"):
            ImageTensor(torch.full((3, 4, 4), 1.5))

    def test_rejects_non_finite(self):
        bad = torch.zeros(3, 4, 4)
        bad[0, 0, 0] = float("nan")
        with pytest.raises(DomainError, match="finite"):
            ImageTensor(bad)

    @given(st.integers(1, 16), st.integers(1, 16))
    @settings(max_examples=20, deadline=None)
    def test_any_multiple_of_four_accepted(self, i, j):
        ImageTensor(torch.zeros(3, 4 * i, 4 * j))


class TestConfig:
    def test_defaults_valid(self):
        cfg = TrainConfig()
        assert validate_config(cfg) is cfg
        assert (cfg.lambda1, cfg.lambda2, cfg.lambda3) == (10.0, 1.0, 10.0)
        assert cfg.learning_rate == 1e-4
        assert (cfg.adam_beta1, cfg.adam_beta2) == (0.5, 0.999)

    def test_image_size_divisibility(self):
        with pytest.raises(ConfigError) as err:
            validate_config(TrainConfig(image_size=255))
        assert any("image_size not divisible by 4" in v for v in err.value.violations)

    def test_negative_learning_rate(self):
        with pytest.raises(ConfigError) as err:
            validate_config(TrainConfig(learning_rate=-1))
        assert any("learning_rate not positive" in v for v in err.value.violations)

    def test_all_violations_reported(self):
        with pytest.raises(ConfigError) as err:
            validate_config(TrainConfig(learning_rate=-1, image_size=255, prior_std=0))
        assert len(err.value.violations) == 3

    def test_json_round_trip(self):
        cfg = TrainConfig(code_length=2, prior_mean=1.0, mmd_enabled=False)
        assert TrainConfig.from_json(cfg.to_json()) == cfg

    def test_json_unknown_key_rejected(self):
        doc = json.loads(TrainConfig().to_json())
        doc["learning_rte"] = 1e-4
        with pytest.raises(ConfigError, match="unknown key 'learning_rte'"):
            TrainConfig.from_json(json.dumps(doc))

    def test_json_field_names_exact(self):
        doc = json.loads(TrainConfig().to_json())
        assert sorted(doc) == sorted([
            "lambda1", "lambda2", "lambda3", "learning_rate", "adam_beta1",
            "adam_beta2", "code_length", "prior_mean", "prior_std", "mmd_enabled",
            "kernel", "truncation_tau", "image_size", "batch_size",
            "total_iterations", "seed"])


@given(st.lists(st.integers(0, 255), min_size=48, max_size=48))
@settings(max_examples=50, deadline=None)
def test_round_trip_property(pixels):
    img = np.array(pixels, dtype=np.uint8).reshape(4, 4, 3)
    assert np.array_equal(denormalize_image(normalize_image(img)), img)
