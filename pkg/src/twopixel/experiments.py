"""Experiment descriptions, seeded simulation and the parameter sweeps.

An :class:`ExperimentSpec` is a JSON-serializable description of a scene, the
optical geometry, the measurement process and the solver. The functions here
turn it into measurements and reconstructions and run the SNR, phase
(incidence angle x compression) and bias sweeps. Everything is deterministic
given the master seed: every realization draws its pattern, noise and tilt
streams from ``SeedSequence(master_seed, spawn_key=(r,))``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import imaging, optics, sensing, solvers, transforms
from .imaging import SceneSpec
from .sensing import ImperfectionModel
from .solvers import SolverConfig

METHODS = ("two-stage", "rfista", "gfb")
MODES = ("ideal", "physical", "perpixel")

DESK_SOLVER = SolverConfig(tau=2.0, eps_reweight=3e-3, max_iters=5000, stop_eps=1e-7, trace_every=50)
FULL_SOLVER = SolverConfig(tau=2.0, eps_reweight=3e-3, max_iters=20000, stop_eps=1e-9, trace_every=50)

# Intensity of the surrounding region in the two-squares scene. A dark but
# nonzero floor: with a brighter depolarized background (0.1 of the squares)
# the reweighting frees the dense coarse band and the 40% compression fit
# becomes underdetermined, costing about 20 dB.
DARK_BACKGROUND = 0.02


class ConfigError(ValueError):
    """An experiment description that cannot be run."""


@dataclass(frozen=True)
class OpticsSpec:
    theta_deg: float = 50.0
    wavelength_nm: float = 780.0
    t1_deg: float = 12.0
    t2_deg: float = -12.0

    def geometry(self, theta_deg=None):
        theta = self.theta_deg if theta_deg is None else theta_deg
        return optics.MirrorGeometry(theta, self.t1_deg, self.t2_deg)

    def index(self):
        return optics.index_lookup(self.wavelength_nm)

    def mixing(self, theta_deg=None):
        return optics.mixing_matrix(self.geometry(theta_deg), self.index())


@dataclass(frozen=True)
class SensingSpec:
    """Measurement process; ``snr_db=None`` means noiseless."""

    compression_rate: float = 0.4
    snr_db: float | None = 40.0
    mode: str = "ideal"
    imperfection: ImperfectionModel = field(
        default_factory=lambda: ImperfectionModel(tilt_error_halfwidth_deg=0.0))

    def __post_init__(self):
        if not 0.0 <= self.compression_rate < 1.0:
            raise ConfigError("compression_rate must lie in [0, 1)")
        if self.mode not in MODES:
            raise ConfigError(f"sensing mode must be one of {MODES}")


@dataclass(frozen=True)
class SolverSpec:
    method: str = "rfista"
    family: str = "haar-undecimated"
    levels: int = 3
    config: SolverConfig = DESK_SOLVER

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"solver method must be one of {METHODS}")
        if self.family not in transforms.FAMILIES:
            raise ConfigError(f"representation family must be one of {transforms.FAMILIES}")

    def representation(self, dims):
        return transforms.SparseRepresentation(self.family, self.levels, dims)


@dataclass(frozen=True)
class SweepSpec:
    """Sweep axes; empty axes fall back to the single value of the base spec."""

    snr_db: tuple = ()
    theta_deg: tuple = ()
    compression_rate: tuple = ()
    bias_deg: tuple = ()
    tilt: tuple = (False, True)
    methods: tuple = METHODS
    realizations: int = 10

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError("realizations must be at least 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        if any(not 0.0 <= r < 1.0 for r in self.compression_rate):
            raise ConfigError("compression rates must lie in [0, 1)")


@dataclass(frozen=True)
class FresnelSpec:
    theta_min: float = 17.0
    theta_max: float = 65.0
    theta_step: float = 1.0
    wavelength_min: float = 450.0
    wavelength_max: float = 850.0
    wavelength_step: float = 10.0

    def grid(self):
        th = np.arange(self.theta_min, self.theta_max + self.theta_step / 2, self.theta_step)
        wl = np.arange(self.wavelength_min, self.wavelength_max + self.wavelength_step / 2,
                       self.wavelength_step)
        return th, wl


@dataclass(frozen=True)
class ExperimentSpec:
    scene: SceneSpec = SceneSpec()
    optics: OpticsSpec = OpticsSpec()
    sensing: SensingSpec = SensingSpec()
    solver: SolverSpec = SolverSpec()
    sweep: SweepSpec = SweepSpec()
    fresnel: FresnelSpec = FresnelSpec()
    seed: int | None = None
    output_dir: str = "out"

    def to_dict(self):
        return _to_jsonable(dataclasses.asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data):
        if "config" in data and "command" in data:
            data = data["config"]  # a manifest written by a previous run
        try:
            return _build(cls, data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("the configuration must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def resolved(self):
        """Copy with an explicit master seed (fresh OS entropy if unset)."""
        if self.seed is not None:
            return self
        return self.with_seed(int(np.random.SeedSequence().entropy) % 2**63)

    def paper_scale(self, command):
        """Full-length settings: L = 20000 (10^4 for the phase map) and 30 SNR realizations."""
        cfg = FULL_SOLVER
        realizations = self.sweep.realizations
        if command == "sweep-phase":
            cfg = replace(cfg, max_iters=10000)
        if command == "sweep-snr":
            realizations = 30
        return replace(self, solver=replace(self.solver, config=replace(
            self.solver.config, max_iters=cfg.max_iters, stop_eps=cfg.stop_eps)),
            sweep=replace(self.sweep, realizations=realizations))


def two_squares_experiment(osc_big, seed=11, max_iters=3000, **scene):
    """The 128 x 128 two-squares run: 40% compression, SNR 40 dB, rFISTA on Haar."""
    scene = {"size": 128, "background": DARK_BACKGROUND, **scene}
    return ExperimentSpec(
        scene=SceneSpec(kind="two-squares", osc_big=float(osc_big), **scene),
        sensing=SensingSpec(compression_rate=0.4, snr_db=40.0),
        solver=SolverSpec(method="rfista", config=replace(DESK_SOLVER, max_iters=max_iters)),
        seed=seed)


def _to_jsonable(v):
    if isinstance(v, dict):
        return {k: _to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_to_jsonable(x) for x in v]
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    if isinstance(v, np.generic):
        return v.item()
    return v


def _build(cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} expects a JSON object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {unknown}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value)
    return cls(**kwargs)


def _coerce(hint, value):
    if dataclasses.is_dataclass(hint):
        return _build(hint, value)
    if value in ("inf", "-inf", "nan"):
        return float(value)
    if isinstance(value, list):
        return tuple(_coerce(typing.Any, v) for v in value)
    return value


# -- seeding ----------------------------------------------------------------------


def realization_seeds(master_seed, r):
    """Independent (patterns, noise, tilt) seeds for realization ``r``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(r),))
    patterns, noise, tilt = (int(s) for s in ss.generate_state(3, dtype=np.uint32))
    return {"patterns": patterns, "noise": noise, "tilt": tilt}


# -- single realizations -----------------------------------------------------------


def scene_signal(spec):
    return imaging.make_scene(spec.scene)


def simulate(spec, x, seeds, theta_deg=None, compression_rate=None, snr_db="base",
             tilt=None):
    """Patterns and measurements for one realization.

    Keyword overrides replace the corresponding spec entries, which is how
    the sweeps move along their axes. ``tilt`` toggles the per-mirror tilt
    error (``None`` keeps the configured mode).
    """
    n = x.size
    rate = spec.sensing.compression_rate if compression_rate is None else compression_rate
    snr = spec.sensing.snr_db if snr_db == "base" else snr_db
    phi = sensing.scrambled_hadamard(n, sensing.measurements_for_rate(n, rate), seed=seeds["patterns"])
    geom = spec.optics.geometry(theta_deg)
    mode = spec.sensing.mode
    imperfection = spec.sensing.imperfection
    if tilt is not None:
        mode = "perpixel" if tilt else "ideal"
        if tilt and imperfection.tilt_error_halfwidth_deg == 0:
            imperfection = replace(imperfection, tilt_error_halfwidth_deg=1.0)
    if mode == "ideal":
        ms = sensing.forward_ideal(optics.mixing_matrix(geom, spec.optics.index()), x, phi,
                                   snr_db=snr, seed=seeds["noise"])
    elif mode == "physical":
        ms = sensing.forward_physical(optics.mixing_matrix(geom, spec.optics.index()), x, phi,
                                      snr_db=snr, seed=seeds["noise"])
    else:
        imperfection = replace(imperfection, seed=seeds["tilt"])
        ms = sensing.forward_perpixel(geom, spec.optics.index(), imperfection, x, phi,
                                      snr_db=snr, seed=seeds["noise"])
    return phi, ms


def reconstruct(spec, methods, ms, phi, a, dims):
    """Run each requested method; GFB warm-starts from the rFISTA result."""
    rep = spec.solver.representation(dims)
    cfg = spec.solver.config
    results = {}
    for m in methods:
        if m == "gfb":
            init = results.get("rfista")
            if init is None:
                init = solvers.solve_combined_rfista(ms, phi, a, rep, cfg)
            results[m] = solvers.solve_constrained_gfb(ms, phi, a, rep, cfg, init=init)
        else:
            results[m] = solvers.solve(m, ms, phi, a, rep, cfg)
    return {m: results[m] for m in methods}


def reconstruction_matrix(spec, theta_deg=None, bias_deg=0.0):
    """Mixing matrix assumed by the solver: geometry at theta + bias."""
    geom = spec.optics.geometry(theta_deg).biased(bias_deg)
    return optics.mixing_matrix(geom, spec.optics.index()).a


# -- sweeps -----------------------------------------------------------------------


def _job(args):
    spec_dict, kind, point, r = args
    spec = ExperimentSpec.from_dict(spec_dict)
    x = scene_signal(spec)
    seeds = realization_seeds(spec.seed, r)
    methods = spec.sweep.methods
    if kind == "snr":
        phi, ms = simulate(spec, x, seeds, snr_db=point["snr_db"])
        a = reconstruction_matrix(spec)
    elif kind == "phase":
        methods = (spec.solver.method,)
        phi, ms = simulate(spec, x, seeds, theta_deg=point["theta_deg"],
                           compression_rate=point["compression_rate"])
        a = reconstruction_matrix(spec, point["theta_deg"])
    elif kind == "bias":
        phi, ms = simulate(spec, x, seeds, tilt=point["tilt"])
        a = reconstruction_matrix(spec, bias_deg=point["bias_deg"])
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")
    results = reconstruct(spec, methods, ms, phi, a, x.shape)
    return {m: imaging.psnr(res.x_hat, x) for m, res in results.items()}


def sweep_points(spec, kind):
    """The ordered list of axis points of a sweep."""
    sw = spec.sweep
    if kind == "snr":
        axis = sw.snr_db or (spec.sensing.snr_db,)
        return [{"snr_db": None if s is None else float(s)} for s in sorted(axis, key=_none_low)]
    if kind == "phase":
        thetas = sw.theta_deg or (spec.optics.theta_deg,)
        rates = sw.compression_rate or (spec.sensing.compression_rate,)
        return [{"theta_deg": float(t), "compression_rate": float(c)}
                for t in sorted(thetas) for c in sorted(rates)]
    if kind == "bias":
        biases = sw.bias_deg or (0.0,)
        return [{"tilt": bool(t), "bias_deg": float(b)}
                for t in sorted(set(sw.tilt)) for b in sorted(biases)]
    raise ValueError(f"unknown sweep kind {kind!r}")


def _none_low(v):
    return -np.inf if v is None else v


def run_sweep(spec, kind, jobs=1):
    """Evaluate every (point, realization) pair.

    Returns ``(points, psnr)`` where ``psnr[method]`` has shape
    (n_points, realizations). The merge is by axis order, so the result does
    not depend on ``jobs``.
    """
    spec = spec.resolved()
    points = sweep_points(spec, kind)
    n_real = spec.sweep.realizations
    spec_dict = spec.to_dict()
    tasks = [(spec_dict, kind, p, r) for p in points for r in range(n_real)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_job, tasks))
    else:
        out = [_job(t) for t in tasks]
    methods = list(out[0])
    psnr = {m: np.array([o[m] for o in out]).reshape(len(points), n_real) for m in methods}
    return points, psnr


def summarize(values):
    """Median, quartiles and mean of a 1D sample of PSNR values."""
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median_psnr": float(med), "q1": float(q1), "q3": float(q3),
            "mean_psnr": float(np.mean(v)), "n_realizations": int(v.size)}


def sweep_table(kind, points, psnr, spec=None):
    """Summary rows (list of dicts) sorted by method and then axis order."""
    rows = []
    for m in psnr:
        for i, p in enumerate(points):
            row = {"method": m}
            if kind == "bias":
                row.update(bias_deg=p["bias_deg"], tilt_enabled=int(p["tilt"]))
            elif kind == "phase":
                row.update(theta_deg=p["theta_deg"], compression_rate=p["compression_rate"])
                if spec is not None:
                    row["kappa"] = optics.condition_number(spec.optics.mixing(p["theta_deg"]))
            else:
                row.update(snr_db=p["snr_db"])
            row.update(summarize(psnr[m][i]))
            rows.append(row)
    return rows


def fresnel_table(spec):
    """Rows (theta, wavelength, r1s, r1p, r2s, r2p, kappa) over the Fresnel grid."""
    thetas, wavelengths = spec.fresnel.grid()
    rows = []
    for wl in wavelengths:
        idx = optics.index_lookup(float(wl))
        for th in thetas:
            geom = optics.MirrorGeometry(float(th), spec.optics.t1_deg, spec.optics.t2_deg)
            m = optics.mixing_matrix(geom, idx)
            r = m.a_raw
            rows.append({"theta_deg": float(th), "wavelength_nm": float(wl),
                         "r1s": r[0, 0], "r1p": r[0, 1], "r2s": r[1, 0], "r2p": r[1, 1],
                         "kappa": optics.condition_number(m)})
    return rows
