"""Command-line experiment runner.

Subcommands: ``fresnel``, ``scene``, ``run``, ``sweep-snr``, ``sweep-phase`` and
``sweep-bias``. Each writes CSV (and, for images, 16-bit PGM) outputs plus a
``manifest.json`` holding the resolved configuration and seeds; feeding that
manifest back through ``--config`` reproduces the run bit for bit.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, imaging, optics, sensing, solvers
from . import experiments as E

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("twopixel")

COMMANDS = {
    "fresnel": "tabulate reflectances and the condition number over a (theta, wavelength) grid",
    "scene": "write the configured scene to disk",
    "run": "simulate measurements and reconstruct a single realization",
    "sweep-snr": "PSNR versus detector SNR for each method",
    "sweep-phase": "PSNR over incidence angle and compression rate",
    "sweep-bias": "PSNR versus incidence-angle bias, with and without tilt errors",
}

SWEEP_KIND = {"sweep-snr": "snr", "sweep-phase": "phase", "sweep-bias": "bias"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON (or a manifest from an earlier run)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--paper-scale", action="store_true",
                        help="full iteration counts and realization numbers")
    common.add_argument("--force", action="store_true", help="rerun even if outputs are complete")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="twopixel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, text in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


# -- output helpers ---------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, rows, columns=None):
    """Write dict rows atomically; floats use their shortest exact repr."""
    path = Path(path)
    columns = columns or (list(rows[0]) if rows else [])
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    os.replace(tmp, path)
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _write_json(path, obj):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(E._to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _save_image_set(out, stem, x, floor):
    """Component, intensity and OSC outputs for a scene or a reconstruction."""
    written = [str(write_signal(out / f"{stem}.csv", x))]
    osc = imaging.osc_map(x, floor)
    if len(x.shape) == 2:
        for name, img, lo, hi in ((f"{stem}_xs", x.x_s, None, None),
                                  (f"{stem}_xp", x.x_p, None, None),
                                  (f"{stem}_xt", x.x_t, None, None),
                                  (f"{stem}_osc", osc, -1.0, 1.0)):
            imaging.write_pgm(out / f"{name}.pgm", img, lo, hi)
            written.append(str(out / f"{name}.pgm"))
    else:
        rows = [{"index": i, "osc": float(v)} for i, v in enumerate(osc)]
        written.append(str(write_csv(out / f"{stem}_osc.csv", rows)))
    return written


def write_signal(path, x):
    imaging.write_signal_csv(path, x)
    return path


class _Manifest:
    def __init__(self, out, command, spec):
        self.path = out / "manifest.json"
        self.data = {"command": command, "status": "running", "stage": "setup",
                     "config": spec.to_dict(), "config_digest": spec.digest(),
                     "seed": spec.seed, "code_version": __version__,
                     "numpy_version": np.__version__, "outputs": []}

    def stage(self, name):
        self.data["stage"] = name

    def finish(self, **extra):
        self.data.update(extra)
        self.data["status"] = "complete"
        _write_json(self.path, self.data)

    def fail(self, exc):
        self.data.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        _write_json(self.path, self.data)


def _is_complete(out, command, spec):
    try:
        with open(out / "manifest.json", encoding="utf-8") as fh:
            prev = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return False
    return (prev.get("status") == "complete" and prev.get("command") == command
            and prev.get("config_digest") == spec.digest())


# -- commands ---------------------------------------------------------------------


def cmd_fresnel(spec, out, manifest, jobs=1):
    manifest.stage("fresnel")
    rows = E.fresnel_table(spec)
    path = write_csv(out / "fresnel.csv", rows)
    kappas = np.array([r["kappa"] for r in rows])
    point = optics.condition_number(spec.optics.mixing())
    summary = {"kappa_at_config": point, "kappa_min": float(kappas.min()),
               "kappa_max": float(kappas.max())}
    print(f"kappa(A) at theta={spec.optics.theta_deg}, wavelength={spec.optics.wavelength_nm}: "
          f"{point:.3f}; grid range [{kappas.min():.2f}, {kappas.max():.2f}]")
    return [str(path)], summary


def cmd_scene(spec, out, manifest, jobs=1):
    manifest.stage("scene")
    x = E.scene_signal(spec)
    return _save_image_set(out, "scene", x, imaging.default_floor(x)), {"shape": list(x.shape)}


def cmd_run(spec, out, manifest, jobs=1):
    manifest.stage("scene")
    x = E.scene_signal(spec)
    floor = imaging.default_floor(x)
    written = _save_image_set(out, "scene", x, floor)

    manifest.stage("sensing")
    seeds = E.realization_seeds(spec.seed, 0)
    phi, ms = E.simulate(spec, x, seeds)
    sensing.save_measurements(out / "measurements.txt", ms)
    sensing.save_sensing(out / "patterns.txt", phi)
    written += [str(out / "measurements.txt"), str(out / "patterns.txt")]

    manifest.stage("reconstruction")
    bias = spec.sensing.imperfection.theta_bias_deg
    a = E.reconstruction_matrix(spec, bias_deg=bias)
    result = E.reconstruct(spec, (spec.solver.method,), ms, phi, a, x.shape)[spec.solver.method]
    written += _save_image_set(out, "reconstruction", result.x_hat, floor)
    solvers.write_trace_csv(out / "trace.csv", result)
    written.append(str(out / "trace.csv"))

    manifest.stage("metrics")
    err_t, err_osc = imaging.error_map(result.x_hat, x, floor)
    if err_t.ndim == 2:
        imaging.write_pgm(out / "error_xt.pgm", err_t)
        imaging.write_pgm(out / "error_osc.pgm", err_osc, 0.0, 2.0)
        written += [str(out / "error_xt.pgm"), str(out / "error_osc.pgm")]
    else:
        rows = [{"index": i, "error_xt": float(e1), "error_osc": float(e2)}
                for i, (e1, e2) in enumerate(zip(err_t, err_osc))]
        written.append(str(write_csv(out / "error_maps.csv", rows)))
    value = imaging.psnr(result.x_hat, x)
    metrics = {"method": spec.solver.method, "psnr_db": value,
               "iterations": result.iterations_run, "converged": bool(result.converged),
               "physical": result.x_hat.is_physical}
    write_csv(out / "metrics.csv", [metrics])
    written.append(str(out / "metrics.csv"))
    print(f"{spec.solver.method}: PSNR {value:.2f} dB after {result.iterations_run} iterations")
    extra = {"seeds": {"realization_0": seeds},
             "normalization": {"pattern_scale": 1.0 / np.sqrt(x.size),
                               "measurement_scale": 1.0 / np.sqrt(x.size),
                               "noise_sigma": ms.sigma},
             "metrics": metrics}
    return written, extra


def _sweep(command):
    kind = SWEEP_KIND[command]

    def run(spec, out, manifest, jobs=1):
        manifest.stage(command)
        points, psnr = E.run_sweep(spec, kind, jobs=jobs)
        rows = E.sweep_table(kind, points, psnr, spec)
        summary = write_csv(out / f"{command.replace('-', '_')}.csv", rows)
        raw_rows = []
        for m, values in psnr.items():
            for i, p in enumerate(points):
                for r, v in enumerate(values[i]):
                    raw_rows.append({"method": m, **{k: p[k] for k in p}, "realization": r,
                                     "psnr_db": float(v)})
        raw = write_csv(out / f"{command.replace('-', '_')}_raw.csv", raw_rows)
        for row in rows:
            axis = {k: v for k, v in row.items() if k not in
                    ("method", "median_psnr", "q1", "q3", "mean_psnr", "n_realizations")}
            print(f"{row['method']:>9} {axis}: median {row['median_psnr']:.2f} dB "
                  f"[{row['q1']:.2f}, {row['q3']:.2f}], mean {row['mean_psnr']:.2f}")
        seeds = [E.realization_seeds(spec.seed, r) for r in range(spec.sweep.realizations)]
        extra = {"seeds": {"realizations": seeds},
                 "solver": {"max_iters": spec.solver.config.max_iters,
                            "stop_eps": spec.solver.config.stop_eps},
                 "snr_db": spec.sensing.snr_db}
        return [str(summary), str(raw)], extra

    return run


HANDLERS = {"fresnel": cmd_fresnel, "scene": cmd_scene, "run": cmd_run,
            **{c: _sweep(c) for c in SWEEP_KIND}}


def load_spec(args):
    spec = E.ExperimentSpec.load(args.config) if args.config else E.ExperimentSpec()
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    if args.paper_scale:
        spec = spec.paper_scale(args.command)
    if args.out:
        spec = replace(spec, output_dir=args.out)
    return spec.resolved()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = load_spec(args)
        if args.jobs < 1:
            raise E.ConfigError("--jobs must be at least 1")
    except (E.ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not args.force and _is_complete(out, args.command, spec):
        print(f"{out}: outputs are complete for this configuration (use --force to rerun)")
        return EXIT_OK
    manifest = _Manifest(out, args.command, spec)
    start = time.perf_counter()
    try:
        written, extra = HANDLERS[args.command](spec, out, manifest, jobs=args.jobs)
    except (solvers.NumericalError, solvers.SingularMixingError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        manifest.fail(exc)
        print(f"numerical failure during {manifest.data['stage']}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (E.ConfigError, ValueError) as exc:
        manifest.fail(exc)
        print(f"configuration error during {manifest.data['stage']}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest.finish(outputs=written, elapsed_s=round(time.perf_counter() - start, 3), **extra)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
