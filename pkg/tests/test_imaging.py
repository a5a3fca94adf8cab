import numpy as np
import pytest
from hypothesis import given, strategies as st

from twopixel import imaging
from twopixel.imaging import PolarimetricSignal, SceneSpec
from twopixel.transforms import SparseRepresentation


class TestPolarimetricSignal:
    def test_matrix_layout(self):
        x = PolarimetricSignal(np.arange(6.0).reshape(2, 3), np.ones((2, 3)))
        assert x.matrix.shape == (2, 6)
        assert np.array_equal(x.matrix[0], np.arange(6.0))
        back = PolarimetricSignal.from_matrix(x.matrix, (2, 3))
        assert np.array_equal(back.x_s, x.x_s)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            PolarimetricSignal(np.zeros(3), np.zeros(4))

    def test_physical_flag(self):
        assert PolarimetricSignal([2.0], [1.0]).is_physical
        assert not PolarimetricSignal([1.0], [2.0]).is_physical
        assert not PolarimetricSignal([1.0], [-0.5]).is_physical


class TestScenes:
    def test_1d_structure(self):
        x = imaging.make_1d_test(512)
        assert x.shape == (512,)
        assert x.is_physical
        assert np.any((x.x_p == 0) & (x.x_s > 0))
        assert np.any((x.x_p > 0) & (x.x_s > x.x_p))
        assert np.any((x.x_p > 0) & (x.x_s == x.x_p))

    def test_1d_sparse_in_haar(self):
        x = imaging.make_1d_test(512)
        c = SparseRepresentation("haar-undecimated", 3, (512,)).analyze(x.matrix)
        detail = c[:, :-1]
        assert np.mean(np.abs(detail) > 1e-12) <= 0.10

    def test_1d_min_size(self):
        with pytest.raises(ValueError):
            imaging.make_1d_test(8)

    @pytest.mark.parametrize("osc_big", [0.0, 0.4, 0.6, 0.8, 1.0])
    def test_two_squares_regions(self, osc_big):
        x = imaging.make_two_squares(128, osc_big, background=0.02)
        big, small = imaging.two_squares_masks(128)
        back = ~(big | small)
        osc = imaging.osc_map(x)
        assert np.array_equal(osc[small], np.full(small.sum(), 0.8))
        assert osc[big] == pytest.approx(np.full(big.sum(), osc_big), abs=2 ** -52)
        assert np.array_equal(x.x_s[back], x.x_p[back])
        # both squares share the total intensity
        assert np.unique(x.x_t[big | small]).size == 1
        assert x.is_physical

    def test_single_object_at_matching_osc(self):
        osc = imaging.osc_map(imaging.make_two_squares(64, 0.8, background=0.1))
        assert np.unique(osc).size == 2  # background plus one object

    def test_two_squares_validation(self):
        with pytest.raises(ValueError):
            imaging.make_two_squares(16)
        with pytest.raises(ValueError):
            imaging.make_two_squares(64, 1.5)

    def test_hidden_objects(self):
        rng = np.random.default_rng(0)
        base = rng.random((32, 32))
        masks = [np.zeros((32, 32), bool) for _ in range(2)]
        masks[0][2:6, 2:6] = True
        masks[1][10:20, 15:30] = True
        x = imaging.make_hidden_objects(base, masks, [0.5, 0.9])
        assert np.array_equal(x.x_t, base)
        osc = imaging.osc_map(x)
        assert osc[masks[0]] == pytest.approx(0.5)
        assert osc[masks[1]] == pytest.approx(0.9)
        assert np.abs(osc[~(masks[0] | masks[1])]).max() <= 1e-15

    def test_hidden_objects_zero_osc(self):
        base = np.random.default_rng(1).random((16, 16))
        masks = [np.ones((16, 16), bool)]
        x = imaging.make_hidden_objects(base, masks, [0.0])
        assert np.array_equal(x.x_s, base / 2) and np.array_equal(x.x_p, base / 2)

    def test_hidden_objects_large(self):
        x = imaging.make_random_hidden_objects(512, osc=0.6, seed=4)
        assert x.shape == (512, 512)
        assert np.sum(np.abs(imaging.osc_map(x) - 0.6) < 1e-12) > 0
        assert x.is_physical

    def test_hidden_objects_errors(self):
        base = np.ones((8, 8))
        m = np.ones((8, 8), bool)
        with pytest.raises(ValueError):
            imaging.make_hidden_objects(base, [m, m], [0.1, 0.2])
        with pytest.raises(ValueError):
            imaging.make_hidden_objects(base, [np.ones((4, 4), bool)], [0.1])
        with pytest.raises(ValueError):
            imaging.make_hidden_objects(base, [m], [0.1, 0.2])
        with pytest.raises(ValueError):
            imaging.make_hidden_objects(-base, [m], [0.1])

    @pytest.mark.parametrize("kind", ["piecewise-1d", "two-squares", "hidden-objects"])
    def test_scene_dispatch(self, kind):
        spec = SceneSpec(kind=kind, size=64, seed=2)
        assert imaging.make_scene(spec).is_physical

    def test_scene_spec_validation(self):
        with pytest.raises(ValueError):
            SceneSpec(kind="cameraman")
        with pytest.raises(ValueError):
            SceneSpec(osc_big=-0.1)

    @given(st.just(0.0) | st.floats(1e-300, 10), st.floats(0, 1))
    def test_split_round_trip(self, total, osc):
        x_s, x_p = imaging.split_by_osc(np.array([total]), osc)
        assert x_s + x_p == total
        assert x_s >= x_p >= 0


class TestOsc:
    def test_values(self):
        x = PolarimetricSignal([1.0, 2.0, 0.9], [1.0, 0.0, 0.1])
        assert imaging.osc_map(x) == pytest.approx([0.0, 1.0, 0.8])

    def test_floor_on_dark_pixels(self):
        x = PolarimetricSignal([0.0, 1.0], [0.0, 0.0])
        assert imaging.osc_map(x).tolist() == [0.0, 1.0]
        with pytest.raises(ValueError):
            imaging.osc_map(x, floor=0.0)


class TestPsnr:
    def test_identical(self):
        x = imaging.make_1d_test(64)
        assert imaging.psnr(x, x) == np.inf

    @given(st.floats(1e-4, 0.5))
    def test_constant_offset(self, c):
        x = imaging.make_1d_test(64)
        peak = np.max(x.matrix)
        y = PolarimetricSignal(x.x_s / peak + c, x.x_p / peak + c)
        ref = PolarimetricSignal(x.x_s / peak, x.x_p / peak)
        assert imaging.psnr(y, ref) == pytest.approx(10 * np.log10(1 / c**2), rel=1e-9)

    @given(st.floats(1e-3, 1e3))
    def test_scale_invariant(self, s):
        rng = np.random.default_rng(0)
        x = imaging.make_1d_test(64)
        y = PolarimetricSignal(x.x_s + 0.01 * rng.standard_normal(64), x.x_p)
        scaled = imaging.psnr(PolarimetricSignal(s * y.x_s, s * y.x_p), PolarimetricSignal(s * x.x_s, s * x.x_p))
        assert scaled == pytest.approx(imaging.psnr(y, x), rel=1e-9)

    def test_decreasing_in_noise(self):
        x = imaging.make_1d_test(128)
        z = np.random.default_rng(1).standard_normal((2, 128))
        values = [imaging.psnr(x.matrix + s * z, x) for s in (1e-3, 1e-2, 1e-1, 1.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            imaging.psnr(np.zeros(4), np.zeros(6))


class TestErrorMap:
    def test_identical(self):
        x = imaging.make_two_squares(32)
        e_t, e_osc = imaging.error_map(x, x)
        assert not e_t.any() and not e_osc.any()

    def test_single_pixel(self):
        x = imaging.make_two_squares(32, background=0.1)
        xs = x.x_s.copy()
        xs[3, 4] += 0.25
        e_t, _ = imaging.error_map(PolarimetricSignal(xs, x.x_p), x)
        assert np.count_nonzero(e_t) == 1 and e_t[3, 4] == pytest.approx(0.25)

    def test_osc_error_bounded(self):
        rng = np.random.default_rng(2)
        x = imaging.make_two_squares(32, background=0.1)
        y = PolarimetricSignal(rng.standard_normal((32, 32)), rng.standard_normal((32, 32)))
        assert imaging.error_map(y, x)[1].max() <= 2.0


class TestFiles:
    def test_pgm_round_trip(self, tmp_path):
        img = np.linspace(-1, 1, 12).reshape(3, 4)
        imaging.write_pgm(tmp_path / "a.pgm", img, lo=-1, hi=1)
        back = imaging.read_pgm(tmp_path / "a.pgm")
        assert back == pytest.approx(img, abs=2 / 65535)
        assert (tmp_path / "a.pgm.json").exists()

    def test_pgm_header(self, tmp_path):
        imaging.write_pgm(tmp_path / "b.pgm", np.zeros((2, 5)), sidecar=False)
        data = (tmp_path / "b.pgm").read_bytes()
        assert data.startswith(b"P5\n5 2\n65535\n") and len(data) == 13 + 20

    def test_signal_csv_round_trip(self, tmp_path):
        x = imaging.make_two_squares(32, 0.3, background=0.1)
        imaging.write_signal_csv(tmp_path / "x.csv", x)
        back = imaging.read_signal_csv(tmp_path / "x.csv", (32, 32))
        assert np.array_equal(back.x_s, x.x_s) and np.array_equal(back.x_p, x.x_p)
