import math

import numpy as np
import pytest

from lfshear.harness import (
    EvalReport,
    Line,
    diff_map,
    leave_n_out,
    make_synthetic_epi,
    parse_line_spec,
    random_lines,
    read_report_csv,
    synthetic_lightfield,
    view_psnr,
    write_report_csv,
)
from lfshear.lightfield import LightField
from lfshear.reconstruct import IterationParams


class TestReport:
    def test_mean_skips_infinite(self):
        r = EvalReport("x", [(1, 30.0), (2, math.inf), (3, 40.0)])
        assert r.mean_psnr == 35.0 and not r.trivial

    def test_trivial(self):
        r = EvalReport("x", [])
        assert r.trivial and math.isnan(r.mean_psnr)

    def test_csv_round_trip(self, tmp_path):
        r = EvalReport("x", [(1, 31.25), (3, 33.5)], {"n": 2})
        path = write_report_csv(r, tmp_path / "r.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "view_index,psnr_db"
        assert lines[-1] == "mean,32.375"
        rows, mean = read_report_csv(path)
        assert rows == [(1, 31.25), (3, 33.5)] and mean == 32.375
        assert (tmp_path / "r.json").exists()

    def test_csv_bad_header(self, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\nmean,1\n")
        with pytest.raises(ValueError):
            read_report_csv(tmp_path / "x.csv")


class TestViewPsnr:
    def test_rgb_averages_channels(self):
        a = np.zeros((4, 4, 3))
        b = a.copy()
        b[..., 0] = 1.0
        b[..., 1] = 2.0
        b[..., 2] = 4.0
        expect = np.mean([20 * math.log10(255 / e) for e in (1, 2, 4)])
        assert view_psnr(a, b, 255) == pytest.approx(expect, abs=1e-12)

    def test_luma(self):
        a = np.zeros((4, 4, 3))
        b = np.ones((4, 4, 3))
        # luma weights sum to one, so a unit offset in every channel is unit luma
        assert view_psnr(a, b, 255, "luma") == pytest.approx(20 * math.log10(255), abs=1e-9)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            view_psnr(np.zeros(3), np.ones(3), 1, "xyz")


class TestLeaveNOut:
    def test_n1_is_trivial(self):
        lf = LightField(np.zeros((1, 5, 2, 8, 1)), "Y")
        assert leave_n_out(lf, 1).trivial

    def test_held_out_indices(self):
        epi, _ = make_synthetic_epi(32, 9, [(4, 2, 0.9, 4)], d_max=8)
        r = leave_n_out(synthetic_lightfield(epi), 4, IterationParams(n_iter=5), sign=1)
        assert [i for i, _ in r.per_view] == [1, 2, 3, 5, 6, 7]
        assert r.config["d_max"] == 4

    def test_too_few_views(self):
        lf = LightField(np.zeros((1, 3, 2, 8, 1)), "Y")
        with pytest.raises(ValueError):
            leave_n_out(lf, 4)

    def test_synthetic_quality(self):
        epi, _ = make_synthetic_epi(128, 65, random_lines(6, 128, 16, 3), d_max=16)
        r = leave_n_out(synthetic_lightfield(epi), 4, IterationParams(n_iter=50), sign=1,
                        keep_outputs=True)
        assert len(r.per_view) == 48
        assert r.mean_psnr >= 35.0
        np.testing.assert_array_equal(r.outputs[0, ::4, 0, :, 0], 255 * epi[::4])

    def test_full_parallax_grid(self):
        rng = np.random.default_rng(0)
        lf = LightField(rng.uniform(0, 255, size=(5, 5, 4, 16, 1)), "Y")
        r = leave_n_out(lf, 2, IterationParams(n_iter=2), sign=1)
        assert r.config["full_parallax"]
        assert len(r.per_view) == 25 - 9


class TestSyntheticEpi:
    def test_vertical_line(self):
        epi, desc = make_synthetic_epi(16, 5, [Line(3, 0, 1.0, 2)], background=0.0)
        expected = np.zeros(16)
        expected[3:5] = 1.0
        np.testing.assert_allclose(epi, np.tile(expected, (5, 1)))
        assert desc["lines"][0]["position"] == 3

    def test_integer_slope_shifts(self):
        # disparity d_max: one pixel per row, exactly a roll
        epi, _ = make_synthetic_epi(20, 6, [Line(2, 4, 0.8, 3)], d_max=4, background=0.1)
        for t in range(6):
            np.testing.assert_allclose(epi[t], np.roll(epi[0], t), atol=1e-12)

    def test_half_pixel_edge(self):
        epi, _ = make_synthetic_epi(8, 2, [Line(2.5, 0, 1.0, 2)], background=0.0)
        np.testing.assert_allclose(epi[0, 2:5], [0.5, 1.0, 0.5])

    def test_wraps(self):
        epi, _ = make_synthetic_epi(10, 1, [Line(9, 0, 1.0, 2)], background=0.0)
        assert epi[0, 9] == 1.0 and epi[0, 0] == 1.0 and epi[0, 1] == 0.0

    def test_near_line_occludes(self):
        lines = [Line(0, 8, 1.0, 4), Line(0, 0, 0.2, 4)]
        epi, _ = make_synthetic_epi(32, 1, lines, d_max=8)
        np.testing.assert_allclose(epi[0, :4], 1.0)

    def test_texture(self):
        flat, _ = make_synthetic_epi(64, 3, [])
        tex, _ = make_synthetic_epi(64, 3, [], texture_seed=1)
        assert np.all(flat == 0.5) and np.std(tex) > 0.01
        np.testing.assert_allclose(tex[0], tex[2])

    def test_rejects_bad_lines(self):
        with pytest.raises(ValueError):
            make_synthetic_epi(16, 4, [Line(0, 20, 1.0)], d_max=16)
        with pytest.raises(ValueError):
            make_synthetic_epi(16, 4, [Line(0, 1, 1.0, 0)])

    def test_random_lines_reproducible(self):
        a = random_lines(5, 100, 16, seed=7)
        assert a == random_lines(5, 100, 16, seed=7)
        assert all(0 <= ln.disparity <= 16 and 0 <= ln.position < 100 for ln in a)

    def test_parse_spec(self):
        assert parse_line_spec("1:2:0.5,3:4:0.25:6") == [Line(1, 2, 0.5), Line(3, 4, 0.25, 6)]
        assert parse_line_spec("random:10:3") == ("random", 10, 3)
        for bad in ("", "1:2"):
            with pytest.raises(ValueError):
                parse_line_spec(bad)


class TestDiffMap:
    def test_gain_and_clamp(self):
        a = np.array([[10.0, 0.0, 100.0]])
        b = np.array([[12.0, 0.0, 0.0]])
        np.testing.assert_array_equal(diff_map(a, b, 10), [[20, 0, 255]])
        assert diff_map(a, b, 10).dtype == np.uint8

    def test_16bit(self):
        out = diff_map(np.zeros(2), np.array([1.0, 10000.0]), 10, bit_depth=16)
        assert out.dtype == np.uint16 and out.tolist() == [10, 65535]
