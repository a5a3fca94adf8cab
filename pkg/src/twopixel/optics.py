"""Fresnel intensity reflectances of a metallic micromirror and the mixing matrix.

Angles are in degrees at every public interface. The complex index is written
n (1 + j kappa), i.e. ``kappa = k / n`` where k is the usual extinction
coefficient of the tabulated data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

Q = np.diag([1.0, -1.0])

# sigma_min below this fraction of sigma_max counts as singular
SINGULAR_RTOL = 1e-12


class DomainError(ValueError):
    """An incidence angle or wavelength outside the model's domain."""


@dataclass(frozen=True)
class ComplexRefractiveIndex:
    n: float
    kappa: float
    wavelength_nm: float = float("nan")

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError(f"n must be positive, got {self.n}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")

    @classmethod
    def from_nk(cls, n, k, wavelength_nm=float("nan")):
        return cls(n=float(n), kappa=float(k) / float(n), wavelength_nm=float(wavelength_nm))

    @property
    def k(self):
        return self.n * self.kappa

    @property
    def complex(self):
        return complex(self.n, self.n * self.kappa)


@dataclass(frozen=True)
class MirrorGeometry:
    theta_deg: float = 50.0
    t1_deg: float = 12.0
    t2_deg: float = -12.0

    def __post_init__(self):
        for t in self.incidence_angles:
            if not 0.0 < t < 90.0:
                raise DomainError(f"mirror incidence angle {t} deg outside (0, 90)")

    @property
    def incidence_angles(self):
        """Local incidence angles (theta - t1, theta - t2) in degrees."""
        return (self.theta_deg - self.t1_deg, self.theta_deg - self.t2_deg)

    def biased(self, delta_deg):
        """Same mirror tilts, global incidence angle shifted by ``delta_deg``."""
        return MirrorGeometry(self.theta_deg + delta_deg, self.t1_deg, self.t2_deg)


@dataclass(frozen=True)
class MixingMatrix:
    """A = Q A_raw / 2, with A_raw = [[r1s, r1p], [r2s, r2p]]."""

    a_raw: np.ndarray
    a: np.ndarray = field(init=False)
    q: np.ndarray = field(init=False)

    def __post_init__(self):
        a_raw = np.array(self.a_raw, dtype=float)
        if a_raw.shape != (2, 2):
            raise ValueError("a_raw must be 2x2")
        a_raw.setflags(write=False)
        a = Q @ a_raw / 2
        a.setflags(write=False)
        object.__setattr__(self, "a_raw", a_raw)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "q", Q.copy())

    @classmethod
    def from_matrix(cls, a):
        """Wrap an arbitrary signed 2x2 matrix A (used for synthetic tests)."""
        return cls(Q @ (2 * np.asarray(a, dtype=float)))


def _check_angle(theta_deg, closed=False):
    theta = np.asarray(theta_deg, dtype=float)
    upper_ok = theta <= 90.0 if closed else theta < 90.0
    if not np.all((theta >= 0.0) & upper_ok):
        bracket = "]" if closed else ")"
        raise DomainError(f"incidence angle must lie in [0, 90{bracket} deg, got {theta_deg}")
    return np.radians(theta)


def auxiliary_uv(index, theta_deg):
    """Real and imaginary parts of n~ cos(r), the refracted-wave factor.

    Uses u = sqrt((A + sqrt(B)) / 2), v = sqrt((-A + sqrt(B)) / 2) with
    A = n^2 (1 - kappa^2) - sin^2(theta) and B = A^2 + 4 n^4 kappa^2. The
    smaller of the two is recovered from u v = n^2 kappa to avoid cancellation.
    Grazing incidence (90 deg) is accepted here.
    """
    theta = _check_angle(theta_deg, closed=True)
    n, kappa = index.n, index.kappa
    big_a = n**2 * (1 - kappa**2) - np.sin(theta) ** 2
    root_b = np.sqrt(big_a**2 + 4 * n**4 * kappa**2)
    uv = n**2 * kappa
    u_direct = np.sqrt(np.maximum((big_a + root_b) / 2, 0.0))
    v_direct = np.sqrt(np.maximum((-big_a + root_b) / 2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(big_a < 0, np.where(v_direct > 0, uv / v_direct, 0.0), u_direct)
        v = np.where(big_a >= 0, np.where(u_direct > 0, uv / u_direct, 0.0), v_direct)
    if np.ndim(u) == 0:
        return float(u), float(v)
    return u, v


def fresnel_s(index, theta_deg):
    """Intensity reflectance for S (TE) polarization."""
    theta = _check_angle(theta_deg)
    u, v = auxiliary_uv(index, theta_deg)
    c = np.cos(theta)
    r = ((c - u) ** 2 + v**2) / ((c + u) ** 2 + v**2)
    return float(r) if np.ndim(r) == 0 else r


def fresnel_p(index, theta_deg):
    """Intensity reflectance for P (TM) polarization."""
    theta = _check_angle(theta_deg)
    u, v = auxiliary_uv(index, theta_deg)
    c = np.cos(theta)
    re = index.n**2 * (1 - index.kappa**2) * c
    im = 2 * index.n**2 * index.kappa * c
    r = ((re - u) ** 2 + (im - v) ** 2) / ((re + u) ** 2 + (im + v) ** 2)
    return float(r) if np.ndim(r) == 0 else r


def mixing_matrix(geometry, index):
    theta1, theta2 = geometry.incidence_angles
    a_raw = [
        [fresnel_s(index, theta1), fresnel_p(index, theta1)],
        [fresnel_s(index, theta2), fresnel_p(index, theta2)],
    ]
    return MixingMatrix(a_raw)


def perpixel_mixing(index, theta_deg, t1_deg, t2_deg):
    """Stack of per-mirror A matrices, shape (2, 2, N), for per-mirror tilts.

    ``t1_deg`` and ``t2_deg`` are arrays of length N holding each mirror's
    actual tilt in the two directions.
    """
    theta1 = theta_deg - np.asarray(t1_deg, dtype=float)
    theta2 = theta_deg - np.asarray(t2_deg, dtype=float)
    a = np.empty((2, 2, theta1.size))
    a[0, 0] = fresnel_s(index, theta1)
    a[0, 1] = fresnel_p(index, theta1)
    a[1, 0] = -fresnel_s(index, theta2)
    a[1, 1] = -fresnel_p(index, theta2)
    return a / 2


def singular_values(a):
    """Closed-form singular values (s_max, s_min) of a real 2x2 matrix."""
    a = np.asarray(a, dtype=float)
    fro2 = float(np.sum(a * a))
    det = abs(float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]))
    p = np.sqrt(max(fro2 + 2 * det, 0.0))
    m = np.sqrt(max(fro2 - 2 * det, 0.0))
    s_max = (p + m) / 2
    s_min = det / s_max if s_max > 0 else 0.0
    return s_max, s_min


def condition_number(m):
    """kappa(A) = ||A^-1||_2 ||A||_2; +inf for (numerically) singular A."""
    a = m.a if isinstance(m, MixingMatrix) else m
    s_max, s_min = singular_values(a)
    if s_max == 0 or s_min < SINGULAR_RTOL * s_max:
        return float("inf")
    return s_max / s_min


def is_singular(m):
    return not np.isfinite(condition_number(m))


def read_material_table(path):
    """Parse a ``wavelength_nm n k`` table; '#' lines before the header are skipped."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    header = lines[0].split()
    if header != ["wavelength_nm", "n", "k"]:
        raise ValueError(f"bad material table header {header}")
    data = np.array([[float(t) for t in ln.split()] for ln in lines[1:]])
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError("material table rows must be sorted by increasing wavelength")
    return data


@lru_cache(maxsize=None)
def _bundled_table():
    path = resources.files("twopixel") / "data" / "aluminum.txt"
    with resources.as_file(path) as p:
        table = read_material_table(p)
    table.setflags(write=False)
    return table


def aluminum_table():
    return _bundled_table()


def index_lookup(wavelength_nm, table=None):
    """Linearly interpolated index at ``wavelength_nm`` (aluminum by default)."""
    data = _bundled_table() if table is None else np.asarray(table)
    lo, hi = data[0, 0], data[-1, 0]
    if not lo <= wavelength_nm <= hi:
        raise DomainError(f"wavelength {wavelength_nm} nm outside table [{lo}, {hi}]")
    n = np.interp(wavelength_nm, data[:, 0], data[:, 1])
    k = np.interp(wavelength_nm, data[:, 0], data[:, 2])
    return ComplexRefractiveIndex.from_nk(n, k, wavelength_nm)


def aluminum_mixing(theta_deg=50.0, wavelength_nm=780.0, t1_deg=12.0, t2_deg=-12.0):
    """Convenience: A for aluminum mirrors at the given geometry."""
    return mixing_matrix(MirrorGeometry(theta_deg, t1_deg, t2_deg), index_lookup(wavelength_nm))
