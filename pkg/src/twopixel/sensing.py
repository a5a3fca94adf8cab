"""DMD sampling patterns and the two-detector measurement models.

The +/-1 pattern matrix Phi (N x M) has columns taken from distinct non-DC rows
of the Sylvester Hadamard matrix of order N, with pixels reordered by a single
random permutation shared by all columns. Products with Phi and Phi^T go
through a fast Walsh-Hadamard transform; the dense matrix is available for
small problems and tests.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .optics import Q, MixingMatrix, mixing_matrix, perpixel_mixing

SNR_CAP_DB = 300.0
# above this size products go through the fast transform instead of a dense Phi
DENSE_MAX_N = 1024


def fwht(x):
    """Unnormalized Walsh-Hadamard transform along the last axis (Sylvester order)."""
    x = np.array(x, dtype=float)
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    lead = x.shape[:-1]
    h = 1
    while h < n:
        x = x.reshape(*lead, n // (2 * h), 2, h)
        a, b = x[..., 0, :], x[..., 1, :]
        x = np.stack((a + b, a - b), axis=-2)
        h *= 2
    return x.reshape(*lead, n)


def hadamard(n):
    """Dense Sylvester Hadamard matrix H[i, j] = (-1)^popcount(i & j)."""
    idx = np.arange(n)
    bits = np.bitwise_and.outer(idx, idx)
    parity = np.zeros_like(bits)
    while np.any(bits):
        parity ^= bits & 1
        bits >>= 1
    return 1.0 - 2.0 * parity


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    """Scrambled-Hadamard pattern matrix; Phi[i, k] = H[rows[k], permutation[i]]."""

    n: int
    row_indices: np.ndarray
    permutation: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        rows = np.asarray(self.row_indices, dtype=np.int64)
        perm = np.asarray(self.permutation, dtype=np.int64)
        n = int(self.n)
        if n < 2 or n & (n - 1):
            raise ValueError(f"n = {n} must be a power of two >= 2")
        if not 1 <= rows.size <= n - 1:
            raise ValueError(f"need 1 <= m <= n - 1, got m = {rows.size}")
        if np.any(rows <= 0) or np.any(rows >= n) or np.unique(rows).size != rows.size:
            raise ValueError("row indices must be distinct and exclude the DC row 0")
        if not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValueError("permutation must be a permutation of range(n)")
        rows.setflags(write=False)
        perm.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "permutation", perm)

    @property
    def m(self):
        return int(self.row_indices.size)

    @property
    def shape(self):
        return (self.n, self.m)

    @cached_property
    def phi(self):
        """Dense N x M matrix with entries in {-1, +1}."""
        h = hadamard(self.n)
        out = h[np.ix_(self.row_indices, self.permutation)].T.copy()
        out.setflags(write=False)
        return out

    def apply(self, x):
        """X @ Phi for X of shape (..., N)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected last axis {self.n}, got {x.shape}")
        if self.n <= DENSE_MAX_N:
            return x @ self.phi
        return self.apply_fast(x)

    def adjoint(self, r):
        """R @ Phi^T for R of shape (..., M)."""
        r = np.asarray(r, dtype=float)
        if r.shape[-1] != self.m:
            raise ValueError(f"expected last axis {self.m}, got {r.shape}")
        if self.n <= DENSE_MAX_N:
            return r @ self.phi.T
        return self.adjoint_fast(r)

    def apply_fast(self, x):
        x = np.asarray(x, dtype=float)
        scattered = np.empty_like(x)
        scattered[..., self.permutation] = x
        return fwht(scattered)[..., self.row_indices]

    def adjoint_fast(self, r):
        r = np.asarray(r, dtype=float)
        full = np.zeros(r.shape[:-1] + (self.n,))
        full[..., self.row_indices] = r
        return fwht(full)[..., self.permutation]


def measurements_for_rate(n, compression_rate):
    """M = round((1 - r) N), capped at N - 1 because the DC pattern is excluded."""
    if not 0.0 <= compression_rate < 1.0:
        raise ValueError(f"compression rate {compression_rate} outside [0, 1)")
    return int(min(max(round((1.0 - compression_rate) * n), 1), n - 1))


def scrambled_hadamard(n, m, seed=None):
    n, m = int(n), int(m)
    if n < 2 or n & (n - 1):
        raise ValueError(f"n = {n} must be a power of two >= 2")
    if not 1 <= m <= n - 1:
        raise ValueError(f"need 1 <= m <= n - 1, got m = {m}")
    rng = np.random.default_rng(seed)
    rows = rng.choice(np.arange(1, n), size=m, replace=False)
    perm = rng.permutation(n)
    return SensingMatrix(n, rows, perm, seed)


class ExplicitPatterns:
    """Any dense N x M pattern matrix behind the SensingMatrix product interface."""

    def __init__(self, phi):
        self.phi = np.array(phi, dtype=float)
        self.n, self.m = self.phi.shape
        self.shape = self.phi.shape

    def apply(self, x):
        return np.asarray(x, dtype=float) @ self.phi

    def adjoint(self, r):
        return np.asarray(r, dtype=float) @ self.phi.T


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Centered 2 x M detector data, optionally with the raw data and mean term.

    ``y_dc`` is the response A X 1 to a virtual all-ones pattern, i.e. the
    per-detector total flux carried by the mean term (y_dc = Q y_bar[:, 0]).
    The centered data alone do not see the mean of each component.
    """

    y: np.ndarray
    y_tilde: np.ndarray | None = None
    y_bar: np.ndarray | None = None
    sigma: float = 0.0
    snr_db: float = float("inf")
    seed: int | None = None
    meta: dict = field(default_factory=dict)
    y_dc: np.ndarray | None = None

    def __post_init__(self):
        for name in ("y", "y_tilde", "y_bar", "y_dc"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.y.ndim != 2 or self.y.shape[0] != 2:
            raise ValueError(f"y must be 2 x M, got {self.y.shape}")

    @property
    def m(self):
        return self.y.shape[1]


@dataclass(frozen=True)
class ImperfectionModel:
    theta_bias_deg: float = 0.0
    tilt_error_halfwidth_deg: float = 1.0
    tilt_levels: int = 11
    seed: int | None = None

    def __post_init__(self):
        if self.tilt_levels < 1 or self.tilt_levels % 2 == 0:
            raise ValueError("tilt_levels must be a positive odd integer")
        if self.tilt_error_halfwidth_deg < 0:
            raise ValueError("tilt error half-width must be nonnegative")

    @property
    def tilt_values(self):
        """The discrete set of equiprobable tilt errors in degrees."""
        if self.tilt_levels == 1:
            return np.zeros(1)
        return np.linspace(-self.tilt_error_halfwidth_deg, self.tilt_error_halfwidth_deg,
                           self.tilt_levels)

    def draw_tilt_errors(self, n):
        """Independent errors for the two tilt directions, each of shape (N,)."""
        rng = np.random.default_rng(self.seed)
        vals = self.tilt_values
        return vals[rng.integers(0, vals.size, size=n)], vals[rng.integers(0, vals.size, size=n)]


def signal_matrix(x):
    """Flatten a PolarimetricSignal (or any (2, ...) array) to the 2 x N matrix X."""
    if hasattr(x, "matrix"):
        return x.matrix
    x = np.asarray(x, dtype=float)
    if x.shape[0] != 2:
        raise ValueError(f"expected two components on axis 0, got {x.shape}")
    return x.reshape(2, -1)


def _mix(a, x):
    # explicit sum so 2x2 and per-pixel (2, 2, N) stacks round identically
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        a = a[:, :, None]
    return a[:, 0] * x[0] + a[:, 1] * x[1]


def noise_sigma(y, snr_db):
    """Noise std for a target SNR relative to the mean per-sample power of y."""
    if snr_db is None or snr_db >= SNR_CAP_DB:
        return 0.0
    power = float(np.sum(np.square(y)) / y.size)
    return float(np.sqrt(power / 10.0 ** (snr_db / 10.0)))


def add_noise(y, snr_db, seed=None, reference=None):
    """Add i.i.d. Gaussian noise at ``snr_db``; returns (y_noisy, sigma).

    The SNR is measured against ``reference`` (default ``y``), the noiseless
    centered measurements. SNR values at or above 300 dB add nothing.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty measurement array")
    sigma = noise_sigma(y if reference is None else np.asarray(reference), snr_db)
    if sigma == 0.0:
        return y.copy(), 0.0
    z = np.random.default_rng(seed).standard_normal(y.shape)
    return y + sigma * z, sigma


def _noisy_set(y_clean, dc_clean, snr_db, seed, **meta):
    sigma = noise_sigma(y_clean, snr_db)
    y, dc = y_clean.copy(), dc_clean.copy()
    if sigma > 0:
        # same stream as add_noise for y; the flux estimate averages M samples
        rng = np.random.default_rng(seed)
        y = y + sigma * rng.standard_normal(y.shape)
        dc = dc + sigma / np.sqrt(y.shape[1]) * rng.standard_normal(dc.shape)
    snr = float("inf") if snr_db is None else float(snr_db)
    return MeasurementSet(y=y, sigma=sigma, snr_db=snr, seed=seed, meta=meta, y_dc=dc)


def forward_ideal(a, x, phi, snr_db=None, seed=None):
    """Y = A X Phi (+ noise)."""
    a = a.a if isinstance(a, MixingMatrix) else np.asarray(a, dtype=float)
    x = signal_matrix(x)
    if x.shape[1] != phi.n:
        raise ValueError(f"signal has {x.shape[1]} pixels, patterns have {phi.n}")
    z = _mix(a, x)
    return _noisy_set(phi.apply(z), z.sum(axis=1), snr_db, seed, mode="ideal")


def forward_physical(a_raw, x, phi, snr_db=None, seed=None, mean_mode="empirical"):
    """Binary patterns on both detectors, then mean removal.

    Detector 1 sees the pattern phi = (1 + Phi) / 2 and detector 2 its
    complement. ``mean_mode="empirical"`` removes the per-detector average over
    the M patterns; ``"exact"`` removes the true constant term A_raw X 1 / 2.
    """
    a_raw = a_raw.a_raw if isinstance(a_raw, MixingMatrix) else np.asarray(a_raw, dtype=float)
    x = signal_matrix(x)
    if x.shape[1] != phi.n:
        raise ValueError(f"signal has {x.shape[1]} pixels, patterns have {phi.n}")
    y0 = _mix(a_raw, x)  # unpatterned images reflected to each detector
    totals = y0.sum(axis=1)
    y0_phi = phi.apply(y0)
    y_tilde_clean = np.stack([(totals[0] + y0_phi[0]) / 2, (totals[1] - y0_phi[1]) / 2])
    centered_clean = np.stack([y0_phi[0] / 2, -y0_phi[1] / 2])
    sigma = noise_sigma(centered_clean, snr_db)
    y_tilde = y_tilde_clean
    if sigma > 0:
        y_tilde = y_tilde_clean + sigma * np.random.default_rng(seed).standard_normal(y_tilde.shape)
    if mean_mode == "empirical":
        y_bar = np.repeat(y_tilde.mean(axis=1, keepdims=True), phi.m, axis=1)
    elif mean_mode == "exact":
        y_bar = np.repeat((totals / 2)[:, None], phi.m, axis=1)
    else:
        raise ValueError(f"unknown mean_mode {mean_mode!r}")
    snr = float("inf") if snr_db is None else float(snr_db)
    return MeasurementSet(y=y_tilde - y_bar, y_tilde=y_tilde, y_bar=y_bar, sigma=sigma,
                          snr_db=snr, seed=seed, meta={"mode": "physical", "mean_mode": mean_mode},
                          y_dc=Q @ y_bar[:, 0])


def perpixel_matrices(geometry, index, imperfection, n):
    """Per-mirror mixing matrices (2, 2, N) under random tilt errors."""
    e1, e2 = imperfection.draw_tilt_errors(n)
    return perpixel_mixing(index, geometry.theta_deg, geometry.t1_deg + e1, geometry.t2_deg + e2)


def forward_perpixel(geometry, index, imperfection, x, phi, snr_db=None, seed=None):
    """Y = sum_i A_i X[:, i] Phi[i, :] with per-mirror tilt errors (+ noise)."""
    x = signal_matrix(x)
    if x.shape[1] != phi.n:
        raise ValueError(f"signal has {x.shape[1]} pixels, patterns have {phi.n}")
    if imperfection.tilt_error_halfwidth_deg == 0 or imperfection.tilt_levels == 1:
        a = mixing_matrix(geometry, index).a
    else:
        a = perpixel_matrices(geometry, index, imperfection, phi.n)
    z = _mix(a, x)
    return _noisy_set(phi.apply(z), z.sum(axis=1), snr_db, seed, mode="perpixel")


# -- text container -----------------------------------------------------------
#
# A file is a first line "#json <header>" followed by named CSV blocks, each
# introduced by a line "#block <name>". Floats are written with 17 significant
# digits so a load reproduces the arrays exactly.


def write_container(fh, header, blocks):
    fh.write("#json " + json.dumps(header, sort_keys=True) + "\n")
    for name, arr in blocks.items():
        arr = np.atleast_2d(np.asarray(arr))
        fh.write(f"#block {name}\n")
        fmt = "%d" if np.issubdtype(arr.dtype, np.integer) else "%.17g"
        np.savetxt(fh, arr, delimiter=",", fmt=fmt)


def read_container(fh):
    first = fh.readline()
    if not first.startswith("#json "):
        raise ValueError("missing #json header line")
    header = json.loads(first[len("#json "):])
    blocks, name, rows = {}, None, []

    def flush():
        if name is not None:
            blocks[name] = np.loadtxt(io.StringIO("".join(rows)), delimiter=",", ndmin=2)

    for line in fh:
        if line.startswith("#block "):
            flush()
            name, rows = line[len("#block "):].strip(), []
        elif line.strip():
            rows.append(line)
    flush()
    return header, blocks


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    return v


def save_measurements(path, ms, **meta):
    header = {"kind": "MeasurementSet", "sigma": ms.sigma, "snr_db": _jsonable(ms.snr_db),
              "seed": ms.seed, **{k: _jsonable(v) for k, v in {**ms.meta, **meta}.items()}}
    blocks = {"y": ms.y}
    if ms.y_tilde is not None:
        blocks["y_tilde"] = ms.y_tilde
    if ms.y_bar is not None:
        blocks["y_bar"] = ms.y_bar
    if ms.y_dc is not None:
        blocks["y_dc"] = ms.y_dc[None, :]
    with open(path, "w", encoding="utf-8") as fh:
        write_container(fh, header, blocks)


def load_measurements(path):
    with open(path, encoding="utf-8") as fh:
        header, blocks = read_container(fh)
    if header.get("kind") != "MeasurementSet":
        raise ValueError("not a MeasurementSet container")
    snr = header.pop("snr_db")
    snr = float(snr) if isinstance(snr, str) else snr
    sigma, seed = header.pop("sigma"), header.pop("seed")
    header.pop("kind")
    return MeasurementSet(y=blocks["y"], y_tilde=blocks.get("y_tilde"), y_bar=blocks.get("y_bar"),
                          sigma=sigma, snr_db=snr, seed=seed, meta=header,
                          y_dc=blocks["y_dc"].ravel() if "y_dc" in blocks else None)


def save_sensing(path, sm, **meta):
    header = {"kind": "SensingMatrix", "n": sm.n, "m": sm.m, "seed": sm.seed, **meta}
    with open(path, "w", encoding="utf-8") as fh:
        write_container(fh, header, {"row_indices": sm.row_indices[None, :],
                                     "permutation": sm.permutation[None, :]})


def load_sensing(path):
    with open(path, encoding="utf-8") as fh:
        header, blocks = read_container(fh)
    if header.get("kind") != "SensingMatrix":
        raise ValueError("not a SensingMatrix container")
    return SensingMatrix(header["n"], blocks["row_indices"].ravel().astype(np.int64),
                         blocks["permutation"].ravel().astype(np.int64), header.get("seed"))
