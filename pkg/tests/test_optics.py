import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twopixel import optics
from twopixel.optics import (
    ComplexRefractiveIndex,
    DomainError,
    MirrorGeometry,
    MixingMatrix,
    Q,
)

# Golden values, frozen from the complex-amplitude oracle below.
AL_780 = (2.498792, 8.442296)
UV_AL_50 = (2.4893813597081036, 8.474210519880165)
RS_AL_38 = 0.90462835342864
RP_AL_62 = 0.7676997480240527


def complex_fresnel(index, theta_deg):
    """Reflectances from complex amplitudes and Snell's law with complex angle."""
    nt = index.complex
    t = np.radians(theta_deg)
    c = np.cos(t)
    n_cos = np.sqrt(nt**2 - np.sin(t) ** 2 + 0j)
    rs = abs((c - n_cos) / (c + n_cos)) ** 2
    rp = abs((nt**2 * c - n_cos) / (nt**2 * c + n_cos)) ** 2
    return n_cos, rs, rp


@pytest.fixture(scope="module")
def al780():
    return optics.index_lookup(780.0)


indices = st.builds(
    ComplexRefractiveIndex,
    n=st.floats(0.2, 5.0),
    kappa=st.floats(0.0, 20.0),
)
angles = st.floats(0.0, 89.0)


class TestIndex:
    def test_kappa_is_k_over_n(self):
        idx = ComplexRefractiveIndex.from_nk(2.0, 6.0)
        assert idx.kappa == 3.0
        assert idx.k == 6.0
        assert idx.complex == complex(2.0, 6.0)

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ComplexRefractiveIndex(0.0, 1.0)
        with pytest.raises(ValueError):
            ComplexRefractiveIndex(1.0, -0.1)

    def test_table_node_is_exact(self, al780):
        assert (al780.n, al780.k) == pytest.approx(AL_780, abs=1e-15)

    def test_midpoint_is_mean(self):
        table = optics.aluminum_table()
        lo, hi = table[10], table[11]
        mid = optics.index_lookup((lo[0] + hi[0]) / 2)
        assert mid.n == pytest.approx((lo[1] + hi[1]) / 2, rel=1e-14)
        assert mid.k == pytest.approx((lo[2] + hi[2]) / 2, rel=1e-14)

    @pytest.mark.parametrize("wl", [449.0, 851.0])
    def test_outside_table(self, wl):
        with pytest.raises(DomainError):
            optics.index_lookup(wl)

    def test_table_parser(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("# comment\nwavelength_nm n k\n500 1 2\n600 3 4\n")
        assert optics.read_material_table(p).tolist() == [[500, 1, 2], [600, 3, 4]]
        p.write_text("wavelength_nm n k\n600 1 2\n500 3 4\n")
        with pytest.raises(ValueError):
            optics.read_material_table(p)
        p.write_text("lambda n k\n500 1 2\n")
        with pytest.raises(ValueError):
            optics.read_material_table(p)


class TestAuxiliary:
    def test_normal_incidence_dielectric(self):
        u, v = optics.auxiliary_uv(ComplexRefractiveIndex(1.7, 0.0), 0.0)
        assert u == pytest.approx(1.7)
        assert v == 0.0

    def test_grazing_vacuum(self):
        assert optics.auxiliary_uv(ComplexRefractiveIndex(1.0, 0.0), 90.0) == (0.0, 0.0)

    def test_aluminum_golden(self, al780):
        assert optics.auxiliary_uv(al780, 50.0) == pytest.approx(UV_AL_50, rel=1e-12)
        n_cos, _, _ = complex_fresnel(al780, 50.0)
        assert optics.auxiliary_uv(al780, 50.0) == pytest.approx((n_cos.real, n_cos.imag), rel=1e-12)

    @pytest.mark.parametrize("theta", [-1.0, 90.5])
    def test_domain(self, al780, theta):
        with pytest.raises(DomainError):
            optics.auxiliary_uv(al780, theta)

    @given(indices, angles)
    def test_defining_identities(self, idx, theta):
        u, v = optics.auxiliary_uv(idx, theta)
        big_a = idx.n**2 * (1 - idx.kappa**2) - np.sin(np.radians(theta)) ** 2
        big_b = big_a**2 + 4 * idx.n**4 * idx.kappa**2
        assert u >= 0 and v >= 0
        scale = max(abs(big_a), np.sqrt(big_b), 1e-300)
        assert abs(u**2 - v**2 - big_a) <= 1e-10 * scale
        assert (u**2 + v**2) ** 2 == pytest.approx(big_b, rel=1e-10, abs=1e-300)


class TestFresnel:
    def test_index_matched(self):
        idx = ComplexRefractiveIndex(1.0, 0.0)
        assert optics.fresnel_s(idx, 0.0) == 0.0
        assert optics.fresnel_p(idx, 0.0) == 0.0

    @given(indices)
    def test_normal_incidence_degenerate(self, idx):
        n, nk = idx.n, idx.n * idx.kappa
        expected = ((n - 1) ** 2 + nk**2) / ((n + 1) ** 2 + nk**2)
        assert optics.fresnel_s(idx, 0.0) == pytest.approx(expected, rel=1e-12)
        assert optics.fresnel_p(idx, 0.0) == pytest.approx(expected, rel=1e-12)

    def test_brewster(self):
        idx = ComplexRefractiveIndex(1.5, 0.0)
        assert optics.fresnel_p(idx, np.degrees(np.arctan(1.5))) == pytest.approx(0.0, abs=1e-9)

    def test_aluminum_golden(self, al780):
        assert optics.fresnel_s(al780, 38.0) == pytest.approx(RS_AL_38, rel=1e-12)
        assert optics.fresnel_p(al780, 62.0) == pytest.approx(RP_AL_62, rel=1e-12)

    @settings(max_examples=200)
    @given(indices, angles)
    def test_matches_complex_amplitude_oracle(self, idx, theta):
        _, rs, rp = complex_fresnel(idx, theta)
        assert optics.fresnel_s(idx, theta) == pytest.approx(rs, rel=1e-9, abs=1e-12)
        assert optics.fresnel_p(idx, theta) == pytest.approx(rp, rel=1e-9, abs=1e-12)

    @given(indices, angles)
    def test_range(self, idx, theta):
        for r in (optics.fresnel_s(idx, theta), optics.fresnel_p(idx, theta)):
            assert 0.0 <= r <= 1.0 + 1e-12

    def test_vectorized(self, al780):
        th = np.array([10.0, 40.0, 70.0])
        assert optics.fresnel_s(al780, th) == pytest.approx([optics.fresnel_s(al780, t) for t in th])

    def test_domain(self, al780):
        with pytest.raises(DomainError):
            optics.fresnel_s(al780, 90.0)
        with pytest.raises(DomainError):
            optics.fresnel_p(al780, -5.0)

    @given(st.floats(1.01, 4.0))
    def test_dielectric_p_below_s(self, n):
        idx = ComplexRefractiveIndex(n, 0.0)
        theta = np.linspace(0.5, 89.5, 179)
        rs, rp = optics.fresnel_s(idx, theta), optics.fresnel_p(idx, theta)
        assert np.all(rp < rs)
        # a single interior minimum, at Brewster's angle
        k = int(np.argmin(rp))
        assert np.all(np.diff(rp[: k + 1]) < 0) and np.all(np.diff(rp[k:]) > 0)
        assert theta[k] == pytest.approx(np.degrees(np.arctan(n)), abs=0.5)

    def test_aluminum_s_monotone(self):
        theta = np.arange(0.0, 90.0, 0.5)
        for wl in (450.0, 600.0, 780.0, 850.0):
            rs = optics.fresnel_s(optics.index_lookup(wl), theta)
            assert np.all(np.diff(rs) >= 0)

    @pytest.mark.parametrize("wl", [450.0, 780.0, 850.0])
    def test_grazing(self, wl):
        idx = optics.index_lookup(wl)
        assert optics.fresnel_s(idx, 89.9) == pytest.approx(1.0, abs=1e-3)
        # for a metal 1 - r_p is about 10 cos(theta), so p needs a closer approach
        assert optics.fresnel_p(idx, 89.999) == pytest.approx(1.0, abs=1e-3)
        gaps = [1 - optics.fresnel_p(idx, t) for t in (89.9, 89.99, 89.999)]
        assert gaps[1] / gaps[0] == pytest.approx(0.1, rel=0.02)
        assert gaps[2] / gaps[1] == pytest.approx(0.1, rel=0.02)


class TestMixing:
    def test_structure(self, al780):
        m = optics.mixing_matrix(MirrorGeometry(50.0), al780)
        t1, t2 = 38.0, 62.0
        assert m.a_raw.tolist() == [
            [optics.fresnel_s(al780, t1), optics.fresnel_p(al780, t1)],
            [optics.fresnel_s(al780, t2), optics.fresnel_p(al780, t2)],
        ]
        assert np.array_equal(m.a, Q @ m.a_raw / 2)
        assert np.all(m.a[0] >= 0) and np.all(m.a[1] <= 0)
        assert np.all((m.a_raw >= 0) & (m.a_raw <= 1))

    def test_perfect_mirror_limit(self):
        m = optics.mixing_matrix(MirrorGeometry(50.0), ComplexRefractiveIndex(2.0, 1e3))
        assert m.a == pytest.approx(np.array([[0.5, 0.5], [-0.5, -0.5]]), abs=1e-2)

    def test_equal_tilts_singular(self, al780):
        m = optics.mixing_matrix(MirrorGeometry(50.0, 12.0, 12.0), al780)
        assert optics.condition_number(m) == np.inf
        assert optics.is_singular(m)

    def test_condition_number_at_design_point(self):
        kappa = optics.condition_number(optics.aluminum_mixing(50.0, 780.0))
        assert kappa == pytest.approx(26.0, rel=0.15)

    def test_geometry_domain(self):
        with pytest.raises(DomainError):
            MirrorGeometry(theta_deg=10.0)
        with pytest.raises(DomainError):
            MirrorGeometry(theta_deg=80.0)

    def test_biased_geometry(self):
        g = MirrorGeometry(50.0).biased(0.5)
        assert g.incidence_angles == (38.5, 62.5)

    def test_from_matrix_round_trip(self):
        a = np.array([[0.3, 0.1], [-0.2, -0.4]])
        assert MixingMatrix.from_matrix(a).a == pytest.approx(a, abs=1e-16)

    def test_perpixel_matches_scalar(self, al780):
        a = optics.perpixel_mixing(al780, 50.0, np.full(3, 12.0), np.full(3, -12.0))
        ref = optics.mixing_matrix(MirrorGeometry(50.0), al780).a
        for i in range(3):
            assert np.array_equal(a[:, :, i], ref)


class TestConditionNumber:
    def test_identity(self):
        assert optics.condition_number(np.eye(2) / 2) == 1.0

    @given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
    def test_matches_eigen_oracle(self, entries):
        a = np.array(entries).reshape(2, 2)
        ev = np.linalg.eigvalsh(a.T @ a)
        if ev[1] == 0 or ev[0] < 1e-6 * ev[1]:
            return
        assert optics.condition_number(a) == pytest.approx(np.sqrt(ev[1] / ev[0]), rel=1e-8)

    @given(st.floats(-100, 100).filter(lambda c: abs(c) > 1e-3))
    def test_scale_invariant(self, c):
        a = optics.aluminum_mixing().a
        assert optics.condition_number(c * a) == pytest.approx(optics.condition_number(a), rel=1e-12)

    def test_singular_values_closed_form(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.standard_normal((2, 2))
            assert optics.singular_values(a) == pytest.approx(np.linalg.svd(a, compute_uv=False), rel=1e-12)
