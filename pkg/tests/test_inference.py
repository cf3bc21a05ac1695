import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from colorcode.inference import (AdaptationRequest, InferenceError,
                                 InferenceSession, InterpolationRequest,
                                 fuse_codes, mean_hue_shift, truncate)
from colorcode.networks import NetworkBundle
from conftest import TOY_WIDTH, random_image_tensor, toy_config


@pytest.fixture(scope="module")
def session():
    cfg = toy_config(seed=31)
    return InferenceSession(NetworkBundle(cfg, base_channels=TOY_WIDTH), cfg)


@pytest.fixture(scope="module")
def session_2d():
    cfg = toy_config(seed=33, code_length=2)
    return InferenceSession(NetworkBundle(cfg, base_channels=TOY_WIDTH), cfg)


class TestTruncate:
    def test_within_bounds_unchanged(self):
        v = torch.tensor([0.5, -1.9, 2.0])
        assert torch.equal(truncate(v, 2.0), v)

    def test_clamps(self):
        v = torch.tensor([3.0, -5.0])
        assert torch.equal(truncate(v, 2.0), torch.tensor([2.0, -2.0]))

    def test_huge_bound_is_identity(self):
        v = torch.randn(8)
        assert torch.equal(truncate(v, 1e12), v)


class TestFuseCodes:
    def test_alpha_zero_exact_identity(self):
        m_x = torch.randn(8, dtype=torch.float64)
        m_g = torch.randn(8, dtype=torch.float64) * 5
        assert torch.equal(fuse_codes(m_x, m_g, 0.0), m_x)

    def test_alpha_one_is_truncated_guidance(self):
        m_x = torch.randn(8, dtype=torch.float64)
        m_g = torch.randn(8, dtype=torch.float64) * 5
        assert torch.equal(fuse_codes(m_x, m_g, 1.0, tau=2.0), truncate(m_g, 2.0))

    def test_worked_example(self):
        m_x = torch.tensor([1.0, 0.0], dtype=torch.float64)
        m_g = torch.tensor([0.0, 1.0], dtype=torch.float64)
        fused = fuse_codes(m_x, m_g, 0.5)
        want = 1.0 / np.sqrt(2.0)
        assert abs(fused[0].item() - want) < 1e-12
        assert abs(fused[1].item() - want) < 1e-12

    @given(st.floats(0.0, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_orthonormal_inputs_unit_norm(self, alpha):
        m_x = torch.zeros(4, dtype=torch.float64)
        m_g = torch.zeros(4, dtype=torch.float64)
        m_x[0] = 1.0
        m_g[1] = 1.0
        fused = fuse_codes(m_x, m_g, alpha)
        assert abs(fused.norm().item() - 1.0) < 1e-12

    def test_continuity_in_alpha(self):
        m_x = torch.tensor([0.3, -1.2, 0.7], dtype=torch.float64)
        m_g = torch.tensor([1.5, 0.2, -0.9], dtype=torch.float64)
        alphas = np.linspace(0, 1, 2001)
        prev = fuse_codes(m_x, m_g, float(alphas[0]))
        biggest_jump = 0.0
        for a in alphas[1:]:
            cur = fuse_codes(m_x, m_g, float(a))
            biggest_jump = max(biggest_jump, (cur - prev).norm().item())
            prev = cur
        assert biggest_jump < 0.01  # Lipschitz-small steps for da = 5e-4

    def test_alpha_out_of_range(self):
        v = torch.zeros(4)
        with pytest.raises(InferenceError, match="alpha"):
            fuse_codes(v, v, 1.2)

    def test_length_mismatch(self):
        with pytest.raises(InferenceError, match="shapes"):
            fuse_codes(torch.zeros(4), torch.zeros(5), 0.5)


class TestEnhance:
    def test_output_size_and_determinism(self, session):
        x = random_image_tensor(seed=1)
        out1 = session.enhance(x)
        out2 = session.enhance(x)
        assert out1.data.shape == x.data.shape
        assert torch.equal(out1.data, out2.data)


class TestAdapt:
    def test_alpha_zero_bit_identical_to_enhance(self, session):
        x = random_image_tensor(seed=2)
        g = random_image_tensor(seed=3)
        base = session.enhance(x)
        adapted = session.adapt(AdaptationRequest(x=x, guidance=g, alpha=0.0))
        assert torch.equal(base.data, adapted.data)

    def test_alpha_changes_output(self, session):
        x = random_image_tensor(seed=4)
        g = random_image_tensor(seed=5)
        base = session.enhance(x)
        adapted = session.adapt(AdaptationRequest(x=x, guidance=g, alpha=0.8))
        assert not torch.equal(base.data, adapted.data)

    def test_mask_preserves_background_exactly(self, session):
        x = random_image_tensor(seed=6)
        g = random_image_tensor(seed=7)
        mask = torch.zeros(x.height, x.width)
        mask[:, : x.width // 2] = 1.0
        out = session.adapt(AdaptationRequest(x=x, guidance=g, alpha=0.7, mask=mask))
        base = session.enhance(x)
        outside = out.data[:, :, x.width // 2:]
        assert torch.equal(outside, base.data[:, :, x.width // 2:])

    def test_mask_shape_checked(self, session):
        x = random_image_tensor(seed=8)
        with pytest.raises(InferenceError, match="mask"):
            AdaptationRequest(x=x, guidance=x, alpha=0.1, mask=torch.zeros(8, 8))

    def test_alpha_range_checked(self, session):
        x = random_image_tensor(seed=9)
        with pytest.raises(InferenceError, match="alpha"):
            AdaptationRequest(x=x, guidance=x, alpha=-0.1)


class TestInterpolate:
    def test_wrong_length_rejected(self, session):
        x = random_image_tensor(seed=10)
        req = InterpolationRequest(x=x, z=torch.zeros(5))
        with pytest.raises(InferenceError, match="length"):
            session.interpolate(req)

    def test_zero_alpha_matches_enhance(self, session):
        x = random_image_tensor(seed=11)
        out = session.interpolate(InterpolationRequest(x=x, z=torch.zeros(8), alpha=0.0))
        assert torch.equal(out.data, session.enhance(x).data)

    def test_alpha_default(self, session):
        req = InterpolationRequest(x=random_image_tensor(seed=12), z=torch.zeros(8))
        assert req.alpha == 0.5


class TestGrid:
    def test_needs_2d_code(self, session):
        with pytest.raises(InferenceError, match="2-D"):
            session.interpolation_grid(random_image_tensor(seed=13), steps=3)

    def test_spacing_and_count(self, session_2d):
        grid = session_2d.interpolation_grid(random_image_tensor(seed=14), steps=11,
                                             value_range=(-5.0, 5.0))
        assert len(grid.images) == 11 and all(len(r) == 11 for r in grid.images)
        zs = [z for row in grid.z_values for z in row]
        assert len(zs) == 121
        row0 = [z[1] for z in grid.z_values[0]]
        assert np.allclose(np.diff(row0), 1.0)
        assert grid.center == (5, 5)

    def test_single_step_midpoint(self, session_2d):
        grid = session_2d.interpolation_grid(random_image_tensor(seed=15), steps=1,
                                             value_range=(-5.0, 5.0))
        assert grid.z_values == [[(0.0, 0.0)]]
        assert grid.center == (0, 0)

    def test_row_major_order(self, session_2d):
        grid = session_2d.interpolation_grid(random_image_tensor(seed=16), steps=3,
                                             value_range=(-1.0, 1.0))
        flat = [z for row in grid.z_values for z in row]
        assert flat == [(-1.0, -1.0), (-1.0, 0.0), (-1.0, 1.0),
                        (0.0, -1.0), (0.0, 0.0), (0.0, 1.0),
                        (1.0, -1.0), (1.0, 0.0), (1.0, 1.0)]


class TestTypedCodes:
    def test_color_code_value(self, session):
        code = session.color_code(random_image_tensor(seed=21))
        assert len(code) == session.config.code_length

    def test_content_code_value(self, session):
        x = random_image_tensor(seed=22)
        code = session.content_code(x)
        assert code.values.shape[1:] == (x.height // 4, x.width // 4)


class TestGuidancePoolScoring:
    def test_scores_written_back(self, session, tmp_path):
        from PIL import Image
        from colorcode.data import GuidancePool

        pool_dir = tmp_path / "pool"
        pool_dir.mkdir()
        rng = np.random.default_rng(5)
        for name in ("warm.png", "cool.png"):
            arr = rng.integers(0, 256, (64, 64, 3)).astype(np.uint8)
            Image.fromarray(arr).save(pool_dir / name)
        pool = GuidancePool.open(pool_dir)

        from colorcode.inference import score_guidance_pool
        scores = score_guidance_pool(session, pool)
        assert set(scores) == {"warm.png", "cool.png"}
        assert all(np.isfinite(v) for v in scores.values())
        assert GuidancePool.open(pool_dir).suitability == scores


class TestDiagnostics:
    def test_hue_shift_finite(self, session):
        g = random_image_tensor(seed=17)
        shift = session.guidance_hue_shift(g)
        assert np.isfinite(shift) and 0.0 <= shift <= 180.0

    def test_hue_shift_zero_for_identical(self):
        g = random_image_tensor(seed=18)
        assert mean_hue_shift(g, g) == 0.0
