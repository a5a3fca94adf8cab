"""Undecimated (a trous) wavelet frames in 1D and 2D.

Filters are the orthonormal Haar and 8-tap Symmlet (sym4) pairs, scaled by
1/sqrt(2) per dimension so that every level of the undecimated filterbank is a
Parseval frame. As a consequence the analysis operator W has W^T W = I: the
synthesis operator is exactly its adjoint and reconstructs the input exactly.

Coefficient arrays are stacked along a band axis placed right before the
signal axes: ``(..., J + 1, N)`` in 1D and ``(..., 3 J + 1, H, W)`` in 2D.
Detail bands come first, finest scale first (LH, HL, HH per level in 2D),
and the coarse approximation band is last. Boundaries are periodic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQRT2 = np.sqrt(2.0)

# Orthonormal decomposition low-pass filters (sum = sqrt(2), unit energy).
HAAR_LO = np.array([1.0, 1.0]) / _SQRT2
SYM4_LO = np.array([
    -0.07576571478927333,
    -0.02963552764599851,
    0.49761866763201545,
    0.8037387518059161,
    0.29785779560527736,
    -0.09921954357684722,
    -0.012603967262037833,
    0.0322231006040427,
])

FAMILIES = ("haar-undecimated", "symmlet-undecimated", "identity")


def qmf_highpass(lo):
    """Quadrature mirror high-pass filter g[k] = (-1)^k h[L-1-k]."""
    lo = np.asarray(lo, dtype=float)
    return lo[::-1] * (-1.0) ** np.arange(lo.size)


def filter_pair(family):
    """Return the Parseval-scaled (low, high) analysis filters of a family."""
    if family == "haar-undecimated":
        lo = HAAR_LO
    elif family == "symmlet-undecimated":
        lo = SYM4_LO
    else:
        raise ValueError(f"no filters for family {family!r}")
    return lo / _SQRT2, qmf_highpass(lo) / _SQRT2


def _windows(x, length, step, before):
    """Strided view w[..., k, n] = x[(n + k*step - before) mod N] (last axis)."""
    n = x.shape[-1]
    span = (length - 1) * step
    reps = -(-(span + n) // n) + 1
    ext = np.concatenate([x] * reps, axis=-1) if reps > 1 else x
    start = (-before) % n
    ext = ext[..., start:start + n + span]
    ext = np.ascontiguousarray(ext)
    s = ext.strides[-1]
    return np.lib.stride_tricks.as_strided(
        ext, shape=ext.shape[:-1] + (length, n), strides=ext.strides[:-1] + (s * step, s),
        writeable=False)


def _analysis(x, bank, step, axis):
    # out[..., f, n] = sum_k bank[f, k] x[n + k*step]; the filter axis lands at -2
    x = np.moveaxis(x, axis, -1)
    out = bank @ _windows(x, bank.shape[1], step, 0)
    return np.moveaxis(out, -1, axis) if axis not in (-1, x.ndim - 1) else out


def _synthesis(c, bank, step):
    # adjoint of _analysis along the last axis: c has the filter axis at -2
    length = bank.shape[1]
    win = _windows(c, length, step, (length - 1) * step)  # (..., F, L, N)
    rev = bank[:, ::-1]
    return np.einsum("fk,...fkn->...n", rev, win)


def _correlate(x, taps, step, axis):
    # y[n] = sum_k taps[k] x[n + k*step], periodic
    x = np.moveaxis(x, axis, -1)
    out = (np.asarray(taps)[None, :] @ _windows(x, len(taps), step, 0))[..., 0, :]
    return np.moveaxis(out, -1, axis)


def _convolve(x, taps, step, axis):
    # adjoint of _correlate: y[n] = sum_k taps[k] x[n - k*step]
    x = np.moveaxis(x, axis, -1)
    out = _synthesis(x[..., None, :], np.asarray(taps)[None, :], step)
    return np.moveaxis(out, -1, axis)


@dataclass(frozen=True)
class SparseRepresentation:
    """An undecimated wavelet frame (or the identity) on a fixed signal grid.

    ``dims`` is ``(N,)`` for 1D signals and ``(H, W)`` for images. ``levels``
    is the number of decomposition levels J; the identity family uses 0.
    """

    family: str = "haar-undecimated"
    levels: int = 3
    dims: tuple = (512,)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) not in (1, 2):
            raise ValueError("dims must be 1D (N,) or 2D (H, W)")
        if self.family == "identity":
            if self.levels != 0:
                object.__setattr__(self, "levels", 0)
        elif self.levels < 1:
            raise ValueError("wavelet frames need levels >= 1")

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def n_bands(self):
        if self.family == "identity":
            return 1
        return (self.levels + 1) if self.ndim == 1 else (3 * self.levels + 1)

    @property
    def size(self):
        """Number of signal samples N."""
        return int(np.prod(self.dims))

    @property
    def n_coefficients(self):
        """Total coefficient count N' = n_bands * N."""
        return self.n_bands * self.size

    def _check_signal(self, x):
        if x.shape[x.ndim - self.ndim:] != self.dims:
            raise ValueError(f"signal shape {x.shape} does not end with {self.dims}")

    def _check_coeffs(self, c):
        want = (self.n_bands,) + self.dims
        if c.shape[c.ndim - self.ndim - 1:] != want:
            raise ValueError(f"coefficient shape {c.shape} does not end with {want}")

    def analyze(self, x):
        """Apply the analysis operator (the product with Psi^T)."""
        x = np.asarray(x, dtype=float)
        self._check_signal(x)
        if self.family == "identity":
            return x[..., None, :] if self.ndim == 1 else x[..., None, :, :]
        lo, hi = filter_pair(self.family)
        bands = []
        approx = x
        if self.ndim == 1:
            bank = np.stack([hi, lo])
            for j in range(self.levels):
                step = 2 ** j
                out = bank @ _windows(approx, bank.shape[1], 2 ** j, 0)
                bands.append(out[..., 0, :])
                approx = out[..., 1, :]
        else:
            bank = np.stack([hi, lo])
            length = bank.shape[1]
            for j in range(self.levels):
                step = 2 ** j
                cols = bank @ _windows(np.swapaxes(approx, -1, -2), length, step, 0)
                cols = np.moveaxis(cols, -3, -1)  # (..., 2, H, W), filter along H
                out = bank @ _windows(cols, length, step, 0)  # (..., 2, H, 2, W)
                bands.append(out[..., 1, :, 0, :])  # LH
                bands.append(out[..., 0, :, 1, :])  # HL
                bands.append(out[..., 0, :, 0, :])  # HH
                approx = out[..., 1, :, 1, :]
        bands.append(approx)
        return np.stack(bands, axis=x.ndim - self.ndim)

    def synthesize(self, c):
        """Apply the synthesis operator Psi; the exact adjoint of ``analyze``."""
        c = np.asarray(c, dtype=float)
        self._check_coeffs(c)
        axis = c.ndim - self.ndim - 1
        if self.family == "identity":
            return np.take(c, 0, axis=axis)
        lo, hi = filter_pair(self.family)
        bands = [np.take(c, b, axis=axis) for b in range(self.n_bands)]
        x = bands[-1]
        if self.ndim == 1:
            bank = np.stack([hi, lo])
            for j in reversed(range(self.levels)):
                x = _synthesis(np.stack([bands[j], x], axis=-2), bank, 2 ** j)
        else:
            bank = np.stack([hi, lo])
            for j in reversed(range(self.levels)):
                step = 2 ** j
                lh, hl, hh = bands[3 * j: 3 * j + 3]
                rows_lo = _synthesis(np.stack([lh, x], axis=-2), bank, step)
                rows_hi = _synthesis(np.stack([hh, hl], axis=-2), bank, step)
                both = np.stack([np.swapaxes(rows_hi, -1, -2), np.swapaxes(rows_lo, -1, -2)], axis=-2)
                x = np.swapaxes(_synthesis(both, bank, step), -1, -2)
        return x

    def bands(self, c):
        """Split a stacked coefficient array into its list of bands."""
        c = np.asarray(c)
        self._check_coeffs(c)
        axis = c.ndim - self.ndim - 1
        return [np.take(c, b, axis=axis) for b in range(self.n_bands)]


def analyze(rep, signal):
    return rep.analyze(signal)


def synthesize(rep, coeffs):
    return rep.synthesize(coeffs)
