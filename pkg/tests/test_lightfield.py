import math

import numpy as np
import pytest

from lfshear.harness import make_synthetic_epi
from lfshear.lightfield import (
    CameraGeometry,
    EPIReconstructionError,
    LightField,
    camera_step_bound,
    disparity,
    estimate_disparity_sign,
    extract_epi,
    insert_epi,
    psnr,
    reconstruct_full_parallax,
    reconstruct_hpo,
    refocus,
)
from lfshear.reconstruct import IterationParams

FAST = IterationParams(n_iter=3)


def _lf(n_s, n_t, h=3, w=32, c=1, seed=0, dtype=np.uint8):
    rng = np.random.default_rng(seed)
    views = rng.integers(0, 256, size=(n_s, n_t, h, w, c)).astype(dtype)
    return LightField(views, "RGB" if c == 3 else "Y", 8)


class TestGeometry:
    def test_bound_at_unit_ratio(self):
        assert camera_step_bound(CameraGeometry(focal=2.0, z_min=2.0, delta_v=0.01)) == 0.01

    def test_bound_linear_in_zmin(self):
        a = camera_step_bound(CameraGeometry(focal=1.0, z_min=3.0, delta_v=0.01))
        b = camera_step_bound(CameraGeometry(focal=1.0, z_min=6.0, delta_v=0.01))
        assert b == pytest.approx(2 * a, rel=1e-15)

    def test_bound_arithmetic(self):
        assert camera_step_bound(CameraGeometry(focal=1.0, z_min=2.0, delta_v=0.01)) == pytest.approx(0.02, rel=1e-15)

    def test_disparity(self):
        g = CameraGeometry(focal=1.0, z_min=1.0, delta_v=0.01, delta_t=0.02)
        assert disparity(g, 4.0) == pytest.approx(0.5, rel=1e-15)
        assert disparity(g, math.inf) == 0.0
        assert disparity(g, 1e12) < 1e-9

    def test_bound_gives_one_pixel(self):
        g = CameraGeometry(focal=1.5, z_min=3.0, delta_v=0.004)
        g2 = CameraGeometry(focal=1.5, z_min=3.0, delta_v=0.004, delta_t=camera_step_bound(g))
        assert disparity(g2, g2.z_min) == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("kw", [dict(z_min=0), dict(z_min=2, z_max=1), dict(focal=0, z_min=1)])
    def test_invalid(self, kw):
        kw = {"focal": 1.0, **kw}
        with pytest.raises(ValueError):
            CameraGeometry(**kw)

    def test_nonpositive_depth(self):
        with pytest.raises(ValueError):
            disparity(CameraGeometry(1.0, 1.0), 0.0)


class TestContainer:
    def test_layout_checks(self):
        with pytest.raises(ValueError):
            LightField(np.zeros((1, 2, 3, 4, 2)), "RGB")
        with pytest.raises(ValueError):
            LightField(np.zeros((2, 3, 4)), "Y")
        with pytest.raises(ValueError):
            LightField(np.zeros((1, 2, 3, 4, 1)), "Y", bit_depth=17)

    def test_gray_expands_channel_axis(self):
        lf = LightField(np.zeros((1, 2, 3, 4)), "Y")
        assert lf.views.shape == (1, 2, 3, 4, 1)
        assert lf.n_views == 2 and lf.image_shape == (3, 4)
        assert lf.peak == 255


class TestEPI:
    def test_single_view_row(self):
        lf = _lf(1, 1)
        np.testing.assert_array_equal(extract_epi(lf, 0, 1, 0), lf.views[0, 0, 1, :, 0][None])

    def test_round_trip(self):
        lf = _lf(2, 4, c=3)
        before = lf.views.copy()
        for s in range(2):
            for u in range(3):
                for c in range(3):
                    insert_epi(lf, extract_epi(lf, s, u, c), s, u, c)
        np.testing.assert_array_equal(lf.views, before)

    def test_identical_views_vertical_lines(self):
        row = np.random.default_rng(1).uniform(size=(1, 1, 2, 16, 1))
        lf = LightField(np.repeat(row, 5, axis=1), "Y")
        epi = extract_epi(lf, 0, 1, 0)
        np.testing.assert_array_equal(epi, np.repeat(epi[:1], 5, axis=0))

    @pytest.mark.parametrize("idx", [(1, 0, 0), (0, 3, 0), (0, 0, 1)])
    def test_out_of_range(self, idx):
        with pytest.raises(IndexError):
            extract_epi(_lf(1, 2), *idx)

    def test_insert_shape(self):
        with pytest.raises(ValueError):
            insert_epi(_lf(1, 2), np.zeros((3, 32)), 0, 0, 0)


class TestDisparitySign:
    def test_detects_direction(self):
        epi, _ = make_synthetic_epi(64, 33, [(10, 8, 0.9, 5), (40, 5, 0.1, 3)], d_max=8)
        rows = epi[::8]
        assert estimate_disparity_sign(rows) == 1
        assert estimate_disparity_sign(rows[:, ::-1]) == -1


class TestDrivers:
    def test_hpo_dense_identity(self):
        lf = _lf(1, 4)
        out = reconstruct_hpo(lf, 1, FAST)
        np.testing.assert_array_equal(out.views, lf.views)

    def test_hpo_view_count_and_preservation(self):
        lf = _lf(1, 4, h=2)
        out = reconstruct_hpo(lf, 16, FAST)
        assert out.grid == (1, 49)
        for i in range(4):
            assert np.array_equal(out.views[0, 16 * i], lf.views[0, i])

    def test_per_channel_d_max(self):
        lf = _lf(1, 3, h=2, c=3)
        out = reconstruct_hpo(lf, [8, 4, 4], FAST)
        assert out.grid == (1, 17)
        np.testing.assert_array_equal(out.views[0, ::8], lf.views[0])

    def test_explicit_step(self):
        lf = _lf(1, 3, h=2)
        out = reconstruct_hpo(lf, 4, FAST, step=8)
        assert out.grid == (1, 17)
        with pytest.raises(ValueError):
            reconstruct_hpo(lf, 8, FAST, step=4)

    def test_channels_independent(self):
        lf = _lf(1, 3, h=2, c=3, dtype=float)
        joint = reconstruct_hpo(lf, 4, FAST, sign=1)
        for c in range(3):
            single = LightField(lf.views[..., c:c + 1], "Y")
            sep = reconstruct_hpo(single, 4, FAST, sign=1)
            np.testing.assert_array_equal(joint.views[..., c], sep.views[..., 0])

    def test_workers_match_serial(self):
        lf = _lf(1, 3, h=3, dtype=float)
        a = reconstruct_hpo(lf, 4, FAST, sign=1)
        b = reconstruct_hpo(lf, 4, FAST, sign=1, workers=3)
        np.testing.assert_array_equal(a.views, b.views)

    def test_mirrored_data_handled(self):
        # reversing the pixel axis flips the disparity sign; results mirror exactly
        lf = _lf(1, 3, h=2, dtype=float)
        flipped = LightField(lf.views[..., ::-1, :].copy(), "Y")
        a = reconstruct_hpo(lf, 4, FAST, sign=1)
        b = reconstruct_hpo(flipped, 4, FAST, sign=-1)
        np.testing.assert_allclose(b.views[..., ::-1, :], a.views, atol=1e-12)

    def test_estimated_sign_matches_explicit(self):
        # several image rows and channels: the estimate must see whole EPIs
        epi, _ = make_synthetic_epi(48, 9, [(5, 4, 0.9, 5), (30, 1, 0.1, 4)], d_max=4)
        rows = np.rint(255 * epi[::4])
        views = np.stack([np.repeat(np.stack([r, 0.5 * r + 60, r], -1)[None], 8, 0) for r in rows])
        lf = LightField(views[None].astype(np.uint8), "RGB")
        a = reconstruct_hpo(lf, 4, FAST)
        b = reconstruct_hpo(lf, 4, FAST, sign=1)
        np.testing.assert_array_equal(a.views, b.views)

    def test_hpo_requires_single_row(self):
        with pytest.raises(ValueError):
            reconstruct_hpo(_lf(2, 3), 2, FAST)
        with pytest.raises(ValueError):
            reconstruct_hpo(_lf(1, 1), 2, FAST)

    @pytest.mark.parametrize("n,d,out", [(5, 4, 17), (9, 2, 17)])
    def test_full_parallax_grids(self, n, d, out):
        lf = _lf(n, n, h=4, w=16)
        res = reconstruct_full_parallax(lf, d, d, IterationParams(n_iter=1))
        assert res.grid == (out, out)
        np.testing.assert_array_equal(res.views[::d, ::d], lf.views)

    def test_full_parallax_identity(self):
        lf = _lf(2, 2)
        res = reconstruct_full_parallax(lf, 1, 1, FAST)
        np.testing.assert_array_equal(res.views, lf.views)

    def test_full_parallax_needs_grid(self):
        with pytest.raises(ValueError):
            reconstruct_full_parallax(_lf(1, 3), 2, 2, FAST)

    def test_error_carries_coordinates(self):
        lf = _lf(1, 3, h=2, dtype=float)
        with pytest.raises(EPIReconstructionError) as info:
            reconstruct_hpo(lf, 4, IterationParams(n_iter=30, alpha=1e6, init="zero"), sign=1)
        assert info.value.where[0] == 1


class TestRefocus:
    def test_identical_views(self):
        img = np.random.default_rng(2).uniform(size=(8, 8, 1))
        lf = LightField(np.broadcast_to(img, (3, 3, 8, 8, 1)).copy(), "Y")
        np.testing.assert_allclose(refocus(lf, 0.0), img, atol=1e-12)

    def test_point_source(self):
        n, size, d = 9, 41, 1.5
        views = np.zeros((1, n, size, size, 1))
        for t in range(n):
            x = 20 + d * (t - 4)
            x0 = int(np.floor(x))
            w = x - x0
            views[0, t, 20, x0, 0] += 1 - w
            views[0, t, 20, x0 + 1, 0] += w
        lf = LightField(views, "Y")

        def window_share(img):
            return img[19:22, 19:22].sum() / img.sum()

        assert window_share(refocus(lf, d)) >= 0.9
        assert window_share(refocus(lf, d + 1)) < 0.9
        assert window_share(refocus(lf, d - 1)) < 0.9

    def test_linearity(self):
        rng = np.random.default_rng(3)
        a = LightField(rng.uniform(size=(2, 3, 6, 7, 1)), "Y")
        b = LightField(rng.uniform(size=(2, 3, 6, 7, 1)), "Y")
        combo = LightField(2 * a.views - 0.5 * b.views, "Y")
        np.testing.assert_allclose(refocus(combo, 0.7), 2 * refocus(a, 0.7) - 0.5 * refocus(b, 0.7), atol=1e-10)


class TestPsnr:
    def test_identical(self):
        a = np.ones((4, 4))
        assert psnr(a, a) == math.inf

    def test_closed_form(self):
        a = np.zeros((5, 5))
        assert psnr(a, a + 1, 255) == pytest.approx(20 * math.log10(255), abs=1e-12)
        assert round(psnr(a, a + 1, 255), 2) == 48.13

    def test_symmetric(self):
        rng = np.random.default_rng(4)
        a, b = rng.uniform(size=(2, 6, 6))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros(3), np.zeros(4))
