"""Proximal machinery and the three reconstruction strategies.

All solvers minimize variants of

    ||Lambda * (X Psi^T)||_1 + 1/2 ||Y - A X Phi||_F^2

over the 2 x N component matrix X. Internally the patterns are normalized,
Phi_n = Phi / sqrt(N) and Y_n = Y / sqrt(N), so that ||Phi_n||_2 = 1 and the
step size bound only involves ||A||_2. This rescales the objective by 1/N
and leaves the minimizer unchanged.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .imaging import PolarimetricSignal
from .optics import MixingMatrix, condition_number, singular_values
from .sensing import MeasurementSet, SensingMatrix

log = logging.getLogger(__name__)

MAD_SCALE = 1.4826
LAMBDA_FLOOR = np.finfo(float).eps


class NumericalError(RuntimeError):
    """A solver iterate became non-finite."""


class SingularMixingError(ValueError):
    pass


@dataclass(frozen=True)
class Weights:
    """Lambda[i, j] = lambda_global[i] * w[i, j]; ``w`` is coefficient-shaped."""

    lambda_global: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambda_global, dtype=float).reshape(2)
        w = np.asarray(self.w, dtype=float)
        if np.any(lam <= 0):
            raise ValueError("lambda_global entries must be positive")
        if np.any(w <= 0) or np.any(w > 1):
            raise ValueError("reweighting factors must lie in (0, 1]")
        object.__setattr__(self, "lambda_global", lam)
        object.__setattr__(self, "w", w)

    @property
    def matrix(self):
        lam = self.lambda_global.reshape((2,) + (1,) * (self.w.ndim - 1))
        return lam * self.w


@dataclass(frozen=True)
class SolverConfig:
    """Tuning of the reweighted solvers.

    The first ``outer_loops`` stages run ``reweight_every`` iterations each and
    are followed by a Lambda update; the last stage uses the remaining budget
    of ``max_iters``. ``gamma=None`` picks 0.9 / ||A||_2^2 (with unit-norm
    patterns). ``polish`` appends a Lambda = 0 least-squares stage.

    ``lambda_update`` selects when the global thresholds lambda_i are
    re-estimated from the gradient: ``"iterate"`` does it at every iteration
    (a mad-driven continuation that settles at the noise level), while
    ``"restart"`` only does it at the reweighting restarts. The reweighting
    factors w are refreshed at restarts in both cases.
    """

    tau: float = 3.0
    eps_reweight: float = 1e-3
    gamma: float | None = None
    max_iters: int = 20000
    outer_loops: int = 2
    reweight_every: int = 2000
    gfb_weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    stop_eps: float = 1e-9
    polish: bool = False
    polish_iters: int = 2000
    reweight: bool = True
    trace_every: int = 1
    lambda_update: str = "iterate"

    def __post_init__(self):
        if self.tau <= 0 or self.eps_reweight <= 0:
            raise ValueError("tau and eps_reweight must be positive")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        mu = np.asarray(self.gfb_weights, dtype=float)
        if mu.size != 3 or np.any(mu <= 0) or abs(mu.sum() - 1) > 1e-12:
            raise ValueError("gfb_weights must be three positive numbers summing to 1")
        if self.max_iters < 1 or self.outer_loops < 0 or self.reweight_every < 1:
            raise ValueError("iteration counts must be positive")
        if self.lambda_update not in ("iterate", "restart"):
            raise ValueError("lambda_update must be 'iterate' or 'restart'")

    def stage_lengths(self):
        used = 0
        lengths = []
        for _ in range(self.outer_loops):
            step = min(self.reweight_every, self.max_iters - used)
            if step <= 0:
                break
            lengths.append(step)
            used += step
        lengths.append(max(self.max_iters - used, 0))
        return [n for n in lengths if n > 0] or [self.max_iters]


@dataclass
class SolverResult:
    x_hat: PolarimetricSignal
    iterations_run: int
    objective_trace: np.ndarray
    converged: bool
    wall_time: float
    relative_change: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trace_iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    stage_ends: list = field(default_factory=list)
    stage_objectives: list = field(default_factory=list)
    weights: Weights | None = None
    method: str = ""
    stage1: np.ndarray | None = None

    @property
    def matrix(self):
        return self.x_hat.matrix


# -- proximal operators -----------------------------------------------------------


def soft_threshold(z, lam):
    """Weighted soft thresholding; ``lam`` is an array, a scalar or Weights."""
    if isinstance(lam, Weights):
        lam = lam.matrix
    z = np.asarray(z, dtype=float)
    return z - np.clip(z, -lam, lam)


def prox_l1_synthesis(z, lam, rep):
    """Psi S_Lambda(Z Psi^T), row by row; exact only for orthogonal Psi."""
    z = np.asarray(z, dtype=float)
    shape = z.shape
    sig = z.reshape((shape[0],) + rep.dims)
    return rep.synthesize(soft_threshold(rep.analyze(sig), lam)).reshape(shape)


def prox_positive(z):
    """Projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(z, dtype=float), 0.0)


def prox_inequality(z):
    """Projection onto {X : x_s >= x_p columnwise}.

    Infeasible columns are moved to the midpoint ((a + b) / 2, (a + b) / 2),
    which is Z - D^T pi with pi = [DZ] / 2 on those columns.
    """
    z = np.array(z, dtype=float)
    bad = z[0] < z[1]
    mid = (z[0, bad] + z[1, bad]) / 2
    z[0, bad] = mid
    z[1, bad] = mid
    return z


# -- data term ------------------------------------------------------------------


def _a_of(a):
    if isinstance(a, MixingMatrix):
        return a.a
    return np.asarray(a, dtype=float)


def _y_of(y):
    return y.y if isinstance(y, MeasurementSet) else np.asarray(y, dtype=float)


def gradient(x, y, a, phi):
    """G = -A^T (Y - A X Phi) Phi^T with the raw +/-1 patterns."""
    a = _a_of(a)
    x = np.asarray(x, dtype=float).reshape(2, -1)
    y = _y_of(y)
    if isinstance(phi, SensingMatrix):
        resid = y - a @ phi.apply(x)
        return -phi.adjoint(a.T @ resid)
    phi = np.asarray(phi, dtype=float)
    return -(a.T @ (y - a @ x @ phi)) @ phi.T


def data_fidelity(x, y, a, phi):
    a = _a_of(a)
    x = np.asarray(x, dtype=float).reshape(2, -1)
    model = a @ (phi.apply(x) if isinstance(phi, SensingMatrix) else x @ phi)
    return 0.5 * float(np.sum((_y_of(y) - model) ** 2))


class QuadraticProblem:
    """1/2 ||Y_n - A X Phi_n||^2 with normalized patterns, as used by the solvers.

    When ``y`` carries the flux term ``y_dc`` and ``use_flux`` is set, the
    all-ones pattern is appended as one extra column of Phi. Its norm equals
    that of the +/-1 patterns, so ||Phi_n||_2 stays 1.
    """

    def __init__(self, y, phi, a, rep, use_flux=True):
        self.a = _a_of(a)
        self.phi = phi
        self.rep = rep
        self.scale = 1.0 / np.sqrt(phi.n)
        dc = getattr(y, "y_dc", None) if use_flux else None
        self.use_flux = dc is not None
        ys = _y_of(y)
        if ys.shape != (2, phi.m):
            raise ValueError(f"measurements {ys.shape} do not match patterns {phi.shape}")
        if self.use_flux:
            ys = np.column_stack([ys, np.asarray(dc, dtype=float)])
        self.y = ys * self.scale
        if rep.size != phi.n:
            raise ValueError(f"representation has {rep.size} samples, patterns {phi.n}")
        self.lipschitz = singular_values(self.a)[0] ** 2

    def _patterns(self, x):
        out = self.phi.apply(x)
        if self.use_flux:
            out = np.column_stack([out, x.sum(axis=1)])
        return out

    def _patterns_adjoint(self, r):
        if self.use_flux:
            return self.phi.adjoint(r[:, :-1]) + r[:, -1:]
        return self.phi.adjoint(r)

    def forward(self, x):
        return self.a @ self._patterns(x) * self.scale

    def residual(self, x):
        return self.y - self.forward(x)

    def gradient(self, x):
        return -self._patterns_adjoint(self.a.T @ self.residual(x)) * self.scale

    def fidelity(self, x):
        return 0.5 * float(np.sum(self.residual(x) ** 2))

    def analyze(self, x):
        return self.rep.analyze(x.reshape((2,) + self.rep.dims))

    def synthesize(self, c):
        return self.rep.synthesize(c).reshape(2, -1)

    def prox_l1(self, z, lam):
        return self.synthesize(soft_threshold(self.analyze(z), lam))

    def penalty(self, x, lam):
        return float(np.sum(np.abs(lam * self.analyze(x))))

    def objective(self, x, lam):
        return self.penalty(x, lam) + self.fidelity(x)

    def default_gamma(self):
        return 0.9 / self.lipschitz


# -- parameter updates ------------------------------------------------------------


def mad(c):
    """Gaussian-consistent median absolute deviation of a flat array."""
    c = np.ravel(c)
    return MAD_SCALE * float(np.median(np.abs(c - np.median(c))))


def update_lambda(g, rep, tau):
    """lambda_i = tau * mad(row i of G Psi^T); zero values fall back to a floor."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    g = np.asarray(g, dtype=float)
    coeffs = rep.analyze(g.reshape((2,) + rep.dims)).reshape(2, -1)
    med = np.median(coeffs, axis=1, keepdims=True)
    lam = tau * MAD_SCALE * np.median(np.abs(coeffs - med), axis=1)
    degenerate = ~(lam > 0)
    if np.any(degenerate):
        log.warning("degenerate threshold (zero mad) for components %s; using floor",
                    np.flatnonzero(degenerate).tolist())
        lam[degenerate] = LAMBDA_FLOOR
    return lam


def update_weights(x_hat, rep, eps):
    """w = eps / (eps + |X Psi^T| / ||X Psi^T||_inf); all ones for X = 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x_hat = np.asarray(x_hat, dtype=float)
    coeffs = np.abs(rep.analyze(x_hat.reshape((2,) + rep.dims)))
    top = float(coeffs.max())
    if top == 0.0:
        return np.ones_like(coeffs)
    return eps / (eps + coeffs / top)


def _initial_weights(problem, x, config, reweight_from_x):
    lam = update_lambda(problem.gradient(x), problem.rep, config.tau)
    if reweight_from_x and config.reweight and np.any(x):
        w = update_weights(x, problem.rep, config.eps_reweight)
    else:
        w = np.ones((2, problem.rep.n_bands) + problem.rep.dims)
    return Weights(lam, w)


def _next_weights(problem, x, config):
    lam = update_lambda(problem.gradient(x), problem.rep, config.tau)
    if config.reweight:
        w = update_weights(x, problem.rep, config.eps_reweight)
    else:
        w = np.ones((2, problem.rep.n_bands) + problem.rep.dims)
    return Weights(lam, w)


class _Trace:
    def __init__(self, every):
        # every=None keeps only the forced entries (stage ends and convergence)
        self.every = None if every is None else max(int(every), 1)
        self.iters, self.obj, self.change = [], [], []

    def record(self, it, obj_fn, change, force=False):
        if force or (self.every is not None and it % self.every == 0):
            self.iters.append(it)
            self.obj.append(obj_fn())
            self.change.append(change)


def _check_finite(x, it, method):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{method}: non-finite iterate at iteration {it}")


def momentum(rho):
    """Next FISTA momentum term (1 + sqrt(1 + 4 rho^2)) / 2."""
    return (1.0 + np.sqrt(1.0 + 4.0 * rho * rho)) / 2.0


class _Thresholds:
    """Lambda for one stage, optionally re-estimated from each new gradient."""

    def __init__(self, problem, weights, tau, track):
        self.rep = problem.rep
        self.w = weights.w
        self.lam = weights.lambda_global.copy()
        self.tau = tau
        self.track = track

    def update(self, g):
        if self.track:
            self.lam = update_lambda(g, self.rep, self.tau)
        return self.matrix

    @property
    def matrix(self):
        return self.lam.reshape((2,) + (1,) * (self.w.ndim - 1)) * self.w

    def weights(self):
        return Weights(self.lam, self.w)


def _fista_stage(problem, x0, lam, gamma, n_iters, stop_eps, trace, it0, method):
    """FISTA over one stage; ``lam`` is a _Thresholds. Returns (x, iterations, converged)."""
    w_prev = x0.copy()
    z = x0.copy()
    rho = 1.0
    for t in range(n_iters):
        g = problem.gradient(z)
        thresh = gamma * lam.update(g)
        w_new = problem.prox_l1(z - gamma * g, thresh)
        rho_new = momentum(rho)
        z = w_new + ((rho - 1.0) / rho_new) * (w_new - w_prev)
        denom = np.linalg.norm(w_prev)
        change = np.linalg.norm(w_new - w_prev) / denom if denom > 0 else np.inf
        w_prev = w_new
        rho = rho_new
        it = it0 + t + 1
        done = change < stop_eps
        trace.record(it, lambda: problem.objective(w_new, lam.matrix), change,
                     force=done or t == n_iters - 1)
        if done:
            _check_finite(w_new, it, method)
            return w_new, t + 1, True
        if t % 100 == 0:
            _check_finite(w_new, it, method)
    _check_finite(w_prev, it0 + n_iters, method)
    return w_prev, n_iters, False


def fista(problem, config, x0=None, method="rfista"):
    """Reweighted FISTA on a QuadraticProblem; returns (X, SolverResult pieces)."""
    start = time.perf_counter()
    x = np.zeros((2, problem.phi.n)) if x0 is None else np.array(x0, dtype=float).reshape(2, -1)
    gamma = config.gamma if config.gamma is not None else problem.default_gamma()
    trace = _Trace(config.trace_every)
    weights = _initial_weights(problem, x, config, reweight_from_x=x0 is not None)
    track = config.lambda_update == "iterate"
    total, converged = 0, False
    stage_ends, stage_obj = [], []
    lengths = config.stage_lengths()
    for l, n_iters in enumerate(lengths):
        lam = _Thresholds(problem, weights, config.tau, track)
        x, ran, converged = _fista_stage(problem, x, lam, gamma, n_iters, config.stop_eps,
                                         trace, total, method)
        total += ran
        stage_ends.append(total)
        stage_obj.append(problem.objective(x, lam.matrix))
        weights = lam.weights()
        if l < len(lengths) - 1:
            weights = _next_weights(problem, x, config)
    if config.polish:
        zero = _Thresholds(problem, Weights(np.ones(2), np.ones_like(weights.w)), config.tau, False)
        zero.lam = np.zeros(2)
        x, ran, converged = _fista_stage(problem, x, zero, gamma, config.polish_iters,
                                         config.stop_eps, trace, total, method)
        total += ran
        stage_ends.append(total)
        stage_obj.append(problem.objective(x, zero.matrix))
    return x, _result_parts(trace, total, converged, start, stage_ends, stage_obj, weights, method)


def _result_parts(trace, total, converged, start, stage_ends, stage_obj, weights, method):
    return dict(iterations_run=total, objective_trace=np.asarray(trace.obj),
                relative_change=np.asarray(trace.change), trace_iterations=np.asarray(trace.iters),
                converged=converged, wall_time=time.perf_counter() - start,
                stage_ends=stage_ends, stage_objectives=stage_obj, weights=weights, method=method)


def _result(x, rep, parts):
    return SolverResult(x_hat=PolarimetricSignal.from_matrix(x, rep.dims), **parts)


# -- reconstruction strategies ----------------------------------------------------


def solve_combined_rfista(y, phi, a, rep, config=SolverConfig(), x0=None):
    """Joint CS recovery and unmixing by reweighted FISTA."""
    problem = QuadraticProblem(y, phi, a, rep)
    x, parts = fista(problem, config, x0=x0, method="rfista")
    return _result(x, rep, parts)


def unmix(a, y0):
    """Stage 2 of the two-stage method: X = A^-1 Y0."""
    a = _a_of(a)
    if not np.isfinite(condition_number(a)):
        raise SingularMixingError("mixing matrix is singular; cannot unmix")
    return np.linalg.solve(a, np.asarray(y0, dtype=float).reshape(2, -1))


def solve_two_stage(y, phi, a, rep, config=SolverConfig()):
    """CS recovery of the mixed components Y0 = A X, then X = A^-1 Y0."""
    a_mat = _a_of(a)
    if not np.isfinite(condition_number(a_mat)):
        raise SingularMixingError("mixing matrix is singular; cannot unmix")
    problem = QuadraticProblem(y, phi, np.eye(2), rep)
    y0, parts = fista(problem, config, method="two-stage")
    return _result(unmix(a_mat, y0), rep, {**parts, "stage1": y0})


def constrained_objective(problem, x, lam):
    """Penalized objective with the orthant and x_s >= x_p indicators."""
    if np.any(x < 0) or np.any(x[0] < x[1]):
        return float("inf")
    return problem.objective(x, lam)


def _gfb_stage(problem, x, u, lam, gamma, mu, n_iters, stop_eps, trace, it0):
    """GFB iterations with auxiliaries ``u`` (updated in place)."""
    converged = False
    t = -1
    for t in range(n_iters):
        g = problem.gradient(x)
        thresh = gamma * lam.update(g) / mu[0]
        step = 2 * x - gamma * g
        u[0] += problem.prox_l1(step - u[0], thresh) - x
        u[1] += prox_positive(step - u[1]) - x
        u[2] += prox_inequality(step - u[2]) - x
        x_new = mu[0] * u[0] + mu[1] * u[1] + mu[2] * u[2]
        denom = np.linalg.norm(x)
        change = np.linalg.norm(x_new - x) / denom if denom > 0 else np.inf
        x = x_new
        it = it0 + t + 1
        done = change < stop_eps
        trace.record(it, lambda: problem.objective(x, lam.matrix), change,
                     force=done or t == n_iters - 1)
        if t % 100 == 0 or done:
            _check_finite(x, it, "gfb")
        if done:
            converged = True
            break
    _check_finite(x, it0 + t + 1, "gfb")
    return x, t + 1, converged


def solve_constrained_gfb(y, phi, a, rep, config=SolverConfig(), init=None, cold_start=False):
    """Generalized forward-backward with sparsity, positivity and x_s >= x_p.

    Warm-started from reweighted FISTA unless ``cold_start`` is set or an
    ``init`` result (or 2 x N array) is given. The output is projected once
    onto the orthant and then onto the inequality set, so it is exactly
    feasible.
    """
    start = time.perf_counter()
    problem = QuadraticProblem(y, phi, a, rep)
    if init is None and not cold_start:
        init = solve_combined_rfista(y, phi, a, rep, config)
    if init is None:
        x = np.zeros((2, phi.n))
    else:
        x = np.array(init.matrix if isinstance(init, SolverResult) else init, dtype=float).reshape(2, -1)
    gamma = config.gamma if config.gamma is not None else problem.default_gamma()
    mu = np.asarray(config.gfb_weights, dtype=float)
    trace = _Trace(config.trace_every)
    weights = _initial_weights(problem, x, config, reweight_from_x=init is not None)
    u = [x.copy(), x.copy(), x.copy()]
    total, converged = 0, False
    stage_ends, stage_obj = [], []
    lengths = config.stage_lengths()
    track = config.lambda_update == "iterate"
    for l, n_iters in enumerate(lengths):
        lam = _Thresholds(problem, weights, config.tau, track)
        x, ran, converged = _gfb_stage(problem, x, u, lam, gamma, mu, n_iters,
                                       config.stop_eps, trace, total)
        total += ran
        stage_ends.append(total)
        stage_obj.append(problem.objective(x, lam.matrix))
        weights = lam.weights()
        if l < len(lengths) - 1:
            weights = _next_weights(problem, x, config)
    x = prox_inequality(prox_positive(x))
    parts = _result_parts(trace, total, converged, start, stage_ends, stage_obj, weights, "gfb")
    return _result(x, rep, parts)


class _FixedThresholds:
    """A constant coefficient-shaped threshold array."""

    def __init__(self, lam):
        self.matrix = lam

    def update(self, g):
        return self.matrix


def _fixed_setup(problem, lam, x0, gamma):
    shape = (2, problem.rep.n_bands) + problem.rep.dims
    lam = np.asarray(lam, dtype=float)
    if lam.ndim <= 1:
        lam = lam.reshape((-1,) + (1,) * (len(shape) - 1))
    lam = np.broadcast_to(lam, shape)
    if np.any(lam < 0):
        raise ValueError("thresholds must be nonnegative")
    x = np.zeros((2, problem.phi.n)) if x0 is None else np.array(x0, dtype=float).reshape(2, -1)
    gamma = problem.default_gamma() if gamma is None else float(gamma)
    return _FixedThresholds(np.array(lam)), x, gamma


def fista_fixed(problem, lam, x0=None, gamma=None, max_iters=5000, stop_eps=1e-12):
    """Plain FISTA for a fixed threshold array ``lam`` (scalar, per-component or full).

    Minimizes ``problem.objective(x, lam)``; ``lam = 0`` gives least squares.
    Returns ``(x, iterations, converged)``.
    """
    lam, x, gamma = _fixed_setup(problem, lam, x0, gamma)
    return _fista_stage(problem, x, lam, gamma, max_iters, stop_eps, _Trace(None), 0, "fista")


def gfb_fixed(problem, lam, x0=None, gamma=None, max_iters=5000, stop_eps=1e-12,
              mu=(1 / 3, 1 / 3, 1 / 3)):
    """Constrained GFB for a fixed threshold array, with the output projection."""
    lam, x, gamma = _fixed_setup(problem, lam, x0, gamma)
    mu = np.asarray(mu, dtype=float)
    u = [x.copy(), x.copy(), x.copy()]
    x, ran, converged = _gfb_stage(problem, x, u, lam, gamma, mu, max_iters, stop_eps, _Trace(None), 0)
    return prox_inequality(prox_positive(x)), ran, converged


SOLVERS = {
    "two-stage": solve_two_stage,
    "rfista": solve_combined_rfista,
    "gfb": solve_constrained_gfb,
}


def solve(method, y, phi, a, rep, config=SolverConfig(), **kw):
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(SOLVERS)}") from None
    return fn(y, phi, a, rep, config, **kw)


def write_trace_csv(path, result):
    """Objective trace as CSV: iteration, objective, relative_change."""
    table = np.column_stack([result.trace_iterations, result.objective_trace, result.relative_change])
    np.savetxt(path, table, delimiter=",", header="iteration,objective,relative_change",
               comments="", fmt=["%d", "%.17g", "%.17g"])


def with_overrides(config, **kw):
    return replace(config, **kw)
