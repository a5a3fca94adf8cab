import json
from dataclasses import replace

import numpy as np
import pytest

from twopixel import experiments as E
from twopixel.imaging import SceneSpec
from twopixel.solvers import SolverConfig

TINY = SolverConfig(tau=2.0, eps_reweight=3e-3, max_iters=300, reweight_every=100,
                    stop_eps=1e-7, trace_every=50)


def tiny_spec(**sweep):
    return E.ExperimentSpec(scene=SceneSpec(size=64), sensing=E.SensingSpec(compression_rate=0.25),
                            solver=E.SolverSpec(config=TINY), sweep=E.SweepSpec(**sweep), seed=5)


class TestConfig:
    def test_json_round_trip(self):
        spec = tiny_spec(snr_db=(0.0, 40.0), realizations=2)
        back = E.ExperimentSpec.from_json(spec.to_json())
        assert back == spec
        assert back.digest() == spec.digest()

    def test_noiseless_round_trip(self):
        spec = replace(tiny_spec(), sensing=E.SensingSpec(snr_db=None))
        assert E.ExperimentSpec.from_json(spec.to_json()).sensing.snr_db is None

    def test_manifest_is_accepted(self):
        spec = tiny_spec()
        manifest = {"command": "run", "config": spec.to_dict(), "seed": 5}
        assert E.ExperimentSpec.from_dict(manifest) == spec

    @pytest.mark.parametrize("data", [
        {"colour": 1},
        {"solver": {"config": {"taus": 2}}},
        {"sensing": {"compression_rate": 1.5}},
        {"solver": {"method": "admm"}},
        {"solver": {"config": {"tau": -1}}},
        {"sweep": {"realizations": 0}},
        {"scene": {"kind": "cameraman"}},
        {"optics": []},
    ])
    def test_invalid_configs(self, data):
        with pytest.raises(E.ConfigError):
            E.ExperimentSpec.from_dict(data)

    def test_bad_json(self, tmp_path):
        with pytest.raises(E.ConfigError):
            E.ExperimentSpec.from_json("{not json")
        with pytest.raises(E.ConfigError):
            E.ExperimentSpec.from_json("[1, 2]")
        with pytest.raises(E.ConfigError):
            E.ExperimentSpec.load(tmp_path / "missing.json")

    def test_resolved_seed(self):
        spec = replace(tiny_spec(), seed=None).resolved()
        assert isinstance(spec.seed, int)
        assert tiny_spec().resolved().seed == 5

    def test_paper_scale(self):
        spec = tiny_spec()
        assert spec.paper_scale("run").solver.config.max_iters == 20000
        assert spec.paper_scale("sweep-phase").solver.config.max_iters == 10000
        assert spec.paper_scale("sweep-snr").sweep.realizations == 30
        # the tuning itself is untouched
        assert spec.paper_scale("run").solver.config.tau == TINY.tau

    def test_two_squares_preset(self):
        spec = E.two_squares_experiment(0.4)
        assert spec.scene.kind == "two-squares" and spec.scene.size == 128
        assert spec.scene.background == E.DARK_BACKGROUND
        assert (spec.sensing.compression_rate, spec.sensing.snr_db) == (0.4, 40.0)
        assert E.ExperimentSpec.from_json(spec.to_json()) == spec


class TestSeeds:
    def test_streams_are_distinct(self):
        seeds = [E.realization_seeds(7, r) for r in range(20)]
        flat = [v for s in seeds for v in s.values()]
        assert len(set(flat)) == len(flat)

    def test_stable(self):
        assert E.realization_seeds(7, 3) == E.realization_seeds(7, 3)
        assert E.realization_seeds(7, 3) != E.realization_seeds(8, 3)


class TestSimulation:
    def test_tilt_toggle(self):
        spec = tiny_spec()
        x = E.scene_signal(spec)
        seeds = E.realization_seeds(spec.seed, 0)
        _, plain = E.simulate(spec, x, seeds, tilt=False)
        _, ideal = E.simulate(spec, x, seeds)
        _, tilted = E.simulate(spec, x, seeds, tilt=True)
        assert np.array_equal(plain.y, ideal.y)
        assert not np.array_equal(plain.y, tilted.y)

    def test_axis_overrides(self):
        spec = tiny_spec()
        x = E.scene_signal(spec)
        phi, ms = E.simulate(spec, x, E.realization_seeds(5, 0), compression_rate=0.5, snr_db=None)
        assert phi.m == 32 and ms.sigma == 0.0


class TestSweeps:
    def test_points_order(self):
        spec = tiny_spec(snr_db=(40.0, 0.0), theta_deg=(60.0, 27.0), compression_rate=(0.5, 0.0),
                         bias_deg=(2.0, 0.05))
        assert [p["snr_db"] for p in E.sweep_points(spec, "snr")] == [0.0, 40.0]
        phase = E.sweep_points(spec, "phase")
        assert [(p["theta_deg"], p["compression_rate"]) for p in phase] == [
            (27.0, 0.0), (27.0, 0.5), (60.0, 0.0), (60.0, 0.5)]
        bias = E.sweep_points(spec, "bias")
        assert [(p["tilt"], p["bias_deg"]) for p in bias] == [
            (False, 0.05), (False, 2.0), (True, 0.05), (True, 2.0)]
        with pytest.raises(ValueError):
            E.sweep_points(spec, "wavelength")

    def test_snr_sweep_shape_and_determinism(self):
        spec = tiny_spec(snr_db=(20.0, 60.0), methods=("two-stage", "rfista"), realizations=2)
        points, psnr = E.run_sweep(spec, "snr")
        assert len(points) == 2 and set(psnr) == {"two-stage", "rfista"}
        assert psnr["rfista"].shape == (2, 2)
        _, again = E.run_sweep(spec, "snr")
        assert np.array_equal(psnr["rfista"], again["rfista"])
        assert np.all(psnr["rfista"][1] > psnr["rfista"][0])

    def test_parallel_merge_matches_serial(self):
        spec = tiny_spec(bias_deg=(0.05, 10.0), tilt=(False,), methods=("rfista",), realizations=2)
        _, serial = E.run_sweep(spec, "bias", jobs=1)
        _, parallel = E.run_sweep(spec, "bias", jobs=2)
        assert np.array_equal(serial["rfista"], parallel["rfista"])

    def test_phase_uses_configured_method(self):
        spec = tiny_spec(theta_deg=(50.0,), compression_rate=(0.25,), realizations=1)
        spec = replace(spec, solver=replace(spec.solver, method="two-stage"))
        _, psnr = E.run_sweep(spec, "phase")
        assert list(psnr) == ["two-stage"]

    def test_summary_rows(self):
        rows = E.sweep_table("snr", [{"snr_db": 10.0}], {"gfb": np.array([[1.0, 2.0, 3.0, 4.0]])})
        assert rows == [{"method": "gfb", "snr_db": 10.0, "median_psnr": 2.5, "q1": 1.75,
                         "q3": 3.25, "mean_psnr": 2.5, "n_realizations": 4}]


def test_fresnel_table_grid():
    spec = replace(tiny_spec(), fresnel=E.FresnelSpec(theta_step=12.0, wavelength_step=200.0))
    rows = E.fresnel_table(spec)
    assert len(rows) == 5 * 3
    assert rows[0]["theta_deg"] == 17.0 and rows[-1]["wavelength_nm"] == 850.0
    assert all(0 <= r[k] <= 1 for r in rows for k in ("r1s", "r1p", "r2s", "r2p"))
    json.dumps(rows)
