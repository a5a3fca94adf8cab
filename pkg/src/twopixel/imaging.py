"""Polarimetric test scenes, the OSC observable and reconstruction scores."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PolarimetricSignal:
    """The S and P intensity components on a shared 1D or 2D grid."""

    x_s: np.ndarray
    x_p: np.ndarray

    def __post_init__(self):
        x_s = np.array(self.x_s, dtype=float)
        x_p = np.array(self.x_p, dtype=float)
        if x_s.shape != x_p.shape:
            raise ValueError(f"component shapes differ: {x_s.shape} vs {x_p.shape}")
        x_s.setflags(write=False)
        x_p.setflags(write=False)
        object.__setattr__(self, "x_s", x_s)
        object.__setattr__(self, "x_p", x_p)

    @classmethod
    def from_matrix(cls, x, shape):
        x = np.asarray(x, dtype=float)
        return cls(x[0].reshape(shape), x[1].reshape(shape))

    @property
    def shape(self):
        return self.x_s.shape

    @property
    def size(self):
        return self.x_s.size

    @property
    def matrix(self):
        """Row-major flattening to the 2 x N matrix X."""
        return np.stack([self.x_s.ravel(), self.x_p.ravel()])

    @property
    def x_t(self):
        return self.x_s + self.x_p

    @property
    def is_physical(self):
        """True when x_s >= x_p >= 0 holds everywhere."""
        return bool(np.all(self.x_p >= 0) and np.all(self.x_s >= self.x_p))


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a generated scene.

    ``kind`` is ``piecewise-1d``, ``two-squares`` or ``hidden-objects``;
    ``size`` is the 1D length or the image side. ``osc_big`` is the OSC of the
    big square, and of every object in the hidden-objects scene, whose
    rectangles are placed at random using ``seed``.
    """

    kind: str = "piecewise-1d"
    size: int = 512
    intensity: float = 1.0
    osc_big: float = 0.8
    osc_small: float = 0.8
    background: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("piecewise-1d", "two-squares", "hidden-objects"):
            raise ValueError(f"unknown scene kind {self.kind!r}")
        for o in (self.osc_big, self.osc_small):
            if not 0.0 <= o <= 1.0:
                raise ValueError("OSC values must lie in [0, 1]")
        if self.intensity < 0 or self.background < 0:
            raise ValueError("intensities must be nonnegative")


def split_by_osc(x_t, osc):
    """Components with total ``x_t`` and contrast ``osc``; x_s + x_p == x_t exactly."""
    x_t = np.asarray(x_t, dtype=float)
    x_s = x_t * (1.0 + np.asarray(osc, dtype=float)) / 2.0
    # x_s in [x_t/2, x_t], so the subtraction is exact and the sum round-trips
    x_p = x_t - x_s
    return x_s, x_p


# (start, stop) as fractions of N, S level, P level; zero background elsewhere
_PIECEWISE_REGIONS = (
    (0.07, 0.19, 0.6, 0.0),
    (0.28, 0.40, 1.0, 0.5),
    (0.40, 0.52, 0.4, 0.4),
    (0.62, 0.78, 0.8, 0.2),
    (0.85, 0.91, 0.3, 0.0),
)


def make_1d_test(n=512, spec=None):
    """Piecewise-constant 1D polarimetric signal with x_s >= x_p >= 0.

    Contains S-only regions (x_p = 0 < x_s), a depolarizing region
    (x_s = x_p) and partially polarized overlaps over a zero background.
    """
    if n < 16:
        raise ValueError("n must be at least 16")
    scale = 1.0 if spec is None else spec.intensity
    x_s, x_p = np.zeros(n), np.zeros(n)
    for start, stop, s, p in _PIECEWISE_REGIONS:
        sl = slice(int(round(start * n)), int(round(stop * n)))
        x_s[sl], x_p[sl] = scale * s, scale * p
    return PolarimetricSignal(x_s, x_p)


def two_squares_masks(side):
    """Boolean masks (big, small) of the nested squares; small lies inside big."""
    idx = np.arange(side)
    big_1d = (idx >= side // 4) & (idx < 3 * side // 4)
    small_1d = (idx >= 3 * side // 8) & (idx < 5 * side // 8)
    big = big_1d[:, None] & big_1d[None, :]
    small = small_1d[:, None] & small_1d[None, :]
    return big & ~small, small


def make_two_squares(side=128, osc_big=0.8, osc_small=0.8, intensity=1.0, background=0.0):
    """A bright square holding a smaller square of equal intensity.

    Both squares share the total intensity, so they are indistinguishable in
    x_T and differ only by OSC. The background has intensity ``background``
    and OSC 0. With ``osc_big == osc_small`` there is a single object.
    """
    if side < 32:
        raise ValueError("side must be at least 32")
    if not 0.0 <= osc_big <= 1.0:
        raise ValueError("osc_big must lie in [0, 1]")
    big, small = two_squares_masks(side)
    x_t = np.full((side, side), float(background))
    x_t[big | small] = intensity
    osc = np.zeros((side, side))
    osc[big] = osc_big
    osc[small] = osc_small
    return PolarimetricSignal(*split_by_osc(x_t, osc))


def make_scene(spec):
    if spec.kind == "piecewise-1d":
        return make_1d_test(spec.size, spec)
    if spec.kind == "hidden-objects":
        return make_random_hidden_objects(spec.size, spec.osc_big, spec.intensity, spec.seed)
    return make_two_squares(spec.size, spec.osc_big, spec.osc_small, spec.intensity, spec.background)


def make_random_hidden_objects(side=128, osc=0.6, intensity=1.0, seed=None, n_objects=4):
    """Smooth piecewise intensity image hiding ``n_objects`` rectangles in OSC only."""
    if side < 32:
        raise ValueError("side must be at least 32")
    rng = np.random.default_rng(seed)
    rows = np.arange(side)[:, None] / side
    cols = np.arange(side)[None, :] / side
    base = intensity * (0.3 + 0.4 * (rows > 0.55) + 0.2 * cols)
    masks, taken = [], np.zeros((side, side), dtype=bool)
    for _ in range(1000 * n_objects):
        if len(masks) == n_objects:
            break
        h, w = rng.integers(side // 10, side // 4, size=2)
        r0, c0 = rng.integers(0, side - h), rng.integers(0, side - w)
        mask = np.zeros((side, side), dtype=bool)
        mask[r0:r0 + h, c0:c0 + w] = True
        if not np.any(mask & taken):
            masks.append(mask)
            taken |= mask
    if len(masks) < n_objects:
        raise ValueError(f"could not place {n_objects} disjoint objects")
    return make_hidden_objects(base, masks, [osc] * n_objects)


def make_hidden_objects(base_intensity_image, object_masks, osc_values, background_osc=0.0):
    """Hide objects in an intensity image: x_T is kept, OSC is set per mask."""
    x_t = np.asarray(base_intensity_image, dtype=float)
    if np.any(x_t < 0):
        raise ValueError("intensity image must be nonnegative")
    if len(object_masks) != len(osc_values):
        raise ValueError("one OSC value per mask is required")
    osc = np.full(x_t.shape, float(background_osc))
    covered = np.zeros(x_t.shape, dtype=bool)
    for mask, value in zip(object_masks, osc_values):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x_t.shape:
            raise ValueError(f"mask shape {mask.shape} differs from image {x_t.shape}")
        if np.any(covered & mask):
            raise ValueError("object masks must be disjoint")
        if not 0.0 <= value <= 1.0:
            raise ValueError("OSC values must lie in [0, 1]")
        covered |= mask
        osc[mask] = value
    return PolarimetricSignal(*split_by_osc(x_t, osc))


def default_floor(x):
    return 1e-6 * max(float(np.max(x.x_t)), np.finfo(float).tiny)


def osc_map(x, floor=None):
    """OSC = (x_s - x_p) / max(x_s + x_p, floor), clipped to [-1, 1]."""
    if floor is None:
        floor = default_floor(x)
    if floor <= 0:
        raise ValueError("floor must be positive")
    osc = (x.x_s - x.x_p) / np.maximum(x.x_s + x.x_p, floor)
    return np.clip(osc, -1.0, 1.0)


def psnr(x_hat, x_true):
    """PSNR of the concatenated [x_s x_p] vector; peak is the true maximum."""
    est = _concat(x_hat)
    ref = _concat(x_true)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {ref.shape}")
    mse = float(np.mean((est - ref) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(np.max(ref) ** 2 / mse))


def _concat(x):
    if isinstance(x, PolarimetricSignal):
        return np.concatenate([x.x_s.ravel(), x.x_p.ravel()])
    return np.asarray(x, dtype=float).ravel()


def error_map(x_hat, x_true, floor=None):
    """Absolute error maps (intensity, OSC); the OSC floor follows the truth."""
    if x_hat.shape != x_true.shape:
        raise ValueError(f"shape mismatch {x_hat.shape} vs {x_true.shape}")
    if floor is None:
        floor = default_floor(x_true)
    return (np.abs(x_hat.x_t - x_true.x_t),
            np.abs(osc_map(x_hat, floor) - osc_map(x_true, floor)))


# -- image files ----------------------------------------------------------------


def write_pgm(path, image, lo=None, hi=None, sidecar=True):
    """Write a 16-bit binary PGM, mapping [lo, hi] affinely onto [0, 65535].

    Returns the affine parameters, also stored in ``<path>.json`` when
    ``sidecar`` is set: value = offset + scale * level.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim == 1:
        img = img[None, :]
    lo = float(np.min(img)) if lo is None else float(lo)
    hi = float(np.max(img)) if hi is None else float(hi)
    scale = (hi - lo) / 65535.0 if hi > lo else 1.0
    levels = np.clip(np.rint((img - lo) / scale), 0, 65535).astype(">u2")
    h, w = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(levels.tobytes())
    params = {"offset": lo, "scale": scale, "maxval": 65535}
    if sidecar:
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(params, fh, sort_keys=True)
    return params


def read_pgm(path, params=None):
    """Read a 16-bit PGM; apply ``params`` (or the sidecar JSON if present)."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("only binary (P5) PGM is supported")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    levels = np.frombuffer(data[pos + 1:], dtype=dtype, count=w * h).reshape(h, w)
    if params is None:
        try:
            with open(str(path) + ".json", encoding="utf-8") as fh:
                params = json.load(fh)
        except FileNotFoundError:
            return levels.astype(float)
    return params["offset"] + params["scale"] * levels.astype(float)


def write_signal_csv(path, x):
    """CSV with columns index, x_s, x_p (row-major pixel index for images)."""
    m = x.matrix
    table = np.column_stack([np.arange(m.shape[1]), m[0], m[1]])
    np.savetxt(path, table, delimiter=",", header="index,x_s,x_p", comments="",
               fmt=["%d", "%.17g", "%.17g"])


def read_signal_csv(path, shape=None):
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = table.shape[0]
    return PolarimetricSignal.from_matrix(table[:, 1:].T, shape or (n,))
