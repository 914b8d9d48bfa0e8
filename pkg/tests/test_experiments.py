import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kap.errors import ConfigError, GridIncompatible, SchemaMismatch
from kap.experiments import (
    compare_runs,
    config_from_manifest,
    default_config,
    load_config,
    run_experiment,
    self_convergence,
)
from kap.io import load_snapshot, read_diagnostics, read_manifest, save_snapshot

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


class TestConfig:
    def test_defaults_per_experiment(self):
        cfg = default_config("sod")
        assert cfg.n_v == 32 and cfg.t_end == 0.2
        cfg = default_config("mixing")
        assert cfg.eps_kind == "mixing" and cfg.n_x == 200

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            default_config("sodd")

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError):
            default_config("sod", scheme="rk4")

    @pytest.mark.parametrize("name", ["linear_ode", "smooth_accuracy", "sod", "mixing", "porous_medium"])
    def test_fixture_files_load(self, name):
        cfg = load_config(CONFIG_DIR / f"{name}.ini")
        assert cfg.experiment == name

    def test_overrides_win(self):
        cfg = load_config(CONFIG_DIR / "sod.ini", eps=1e-4, n_v=16)
        assert cfg.eps == 1e-4 and cfg.n_v == 16

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[grid]\nn_q = 3\n")
        with pytest.raises(ConfigError):
            load_config(bad, experiment="sod")


class TestSnapshotIO:
    def test_roundtrip_exact(self, tmp_path, rng):
        f = rng.random((4, 8, 8))
        p = tmp_path / "s.bin"
        save_snapshot(p, f, 4, 8, 7.0, 0.125)
        back, v_max, t = load_snapshot(p)
        assert np.array_equal(back, f)
        assert v_max == 7.0 and t == 0.125


class TestSelfConvergence:
    def test_zero_for_prolonged_field(self, rng):
        f_2h = rng.random((8, 6, 6))
        f_h = np.repeat(f_2h, 2, axis=0)
        assert self_convergence(f_h, f_2h, f_h) == 0.0

    def test_scale_invariance(self, rng):
        f_2h = rng.random((8, 6, 6))
        f_h = np.repeat(f_2h, 2, axis=0) + 0.01 * rng.random((16, 6, 6))
        e1 = self_convergence(f_h, f_2h, f_h)
        e2 = self_convergence(2 * f_h, 2 * f_2h, 2 * f_h)
        assert e1 == pytest.approx(e2, rel=1e-13)

    def test_incompatible_grids(self, rng):
        with pytest.raises(GridIncompatible):
            self_convergence(rng.random((10, 4, 4)), rng.random((4, 4, 4)), rng.random((10, 4, 4)))


@pytest.fixture(scope="module")
def tiny_sod_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sodrun")
    cfg = default_config(
        "sod", n_x=32, n_v=16, eps=1e-1, t_end=0.02, output_interval=0.01, out_dir=str(out), snapshots=True
    )
    run_experiment(cfg)
    return cfg, out


class TestRunArtifacts:
    def test_diagnostics_written(self, tiny_sod_run):
        cfg, out = tiny_sod_run
        man = read_manifest(out)
        assert len(man["output_times"]) == 3
        for k in range(3):
            d = read_diagnostics(out / f"diag_{k:04d}.csv")
            assert d["x"].size == 32
            assert np.all(d["rho"] > 0)
        f, v_max, t = load_snapshot(out / "snap_0002.bin")
        assert f.shape == (32, 16, 16)
        assert t == pytest.approx(0.02)

    def test_manifest_replay_bit_identical(self, tiny_sod_run, tmp_path):
        cfg, out = tiny_sod_run
        man = read_manifest(out)
        cfg2 = config_from_manifest(man)
        cfg2.out_dir = str(tmp_path / "replay")
        run_experiment(cfg2)
        for k in range(3):
            a = (out / f"diag_{k:04d}.csv").read_bytes()
            b = (tmp_path / "replay" / f"diag_{k:04d}.csv").read_bytes()
            assert a == b

    def test_self_compare_is_zero(self, tiny_sod_run):
        _, out = tiny_sod_run
        rep = compare_runs(out, out, fields=("rho", "u", "T"))
        for dists in rep["fields"].values():
            assert max(dists) == 0.0


class TestCompare:
    def test_coarsening(self, tmp_path, tiny_sod_run):
        cfg, out = tiny_sod_run
        cfg2 = config_from_manifest(read_manifest(out))
        cfg2.n_x = 64
        cfg2.out_dir = str(tmp_path / "fine")
        run_experiment(cfg2)
        rep = compare_runs(tmp_path / "fine", out, fields=("rho",))
        assert 0.0 < max(rep["fields"]["rho"]) < 0.05

    def test_mismatched_fields(self, tiny_sod_run):
        _, out = tiny_sod_run
        with pytest.raises(SchemaMismatch):
            compare_runs(out, out, fields=("vorticity",))


class TestCli:
    def _kap(self, *args, cwd):
        return subprocess.run(
            [sys.executable, "-m", "kap.cli", *args],
            capture_output=True,
            text=True,
            cwd=cwd,
        )

    def test_linear_ode_rk2_overflow_record(self, tmp_path):
        r = self._kap(
            "run", "linear_ode", "--dt", "0.3", "--nu", "2", "--scheme", "explicit_rk2", "--out", "lin", cwd=tmp_path
        )
        assert r.returncode == 2
        rec = json.loads((tmp_path / "lin" / "error.json").read_text())
        assert rec["error"] == "Overflow"

    def test_linear_ode_imex2_ok(self, tmp_path):
        r = self._kap("run", "linear_ode", "--dt", "0.3", "--nu", "2", "--scheme", "imex2", "--out", "lin", cwd=tmp_path)
        assert r.returncode == 0
        assert (tmp_path / "lin" / "trajectory.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        r = self._kap("run", "sod", "--scheme", "rk4", cwd=tmp_path)
        assert r.returncode == 3

    def test_porous_short_run(self, tmp_path):
        from kap.io import read_series

        r = self._kap(
            "run", "porous_medium", "--dt", "0.02", "--t-end", "0.1", "--n-v", "32",
            "--output-interval", "0.1", "--out", "fp", cwd=tmp_path,
        )
        assert r.returncode == 0
        series = read_series(tmp_path / "fp" / "series.csv")
        assert list(series) == ["t", "mass", "min_f", "H", "H_rel", "dissipation"]
        assert series["t"].size == 6  # initial + 5 steps
        assert np.all(np.abs(series["mass"] - series["mass"][0]) <= 1e-12 * series["mass"][0])

    def test_compare_tolerance_gate(self, tmp_path, tiny_sod_run):
        _, out = tiny_sod_run
        r = self._kap("compare", str(out), str(out), "--fields", "rho,u,T", "--tol", "0.01", cwd=tmp_path)
        assert r.returncode == 0


class TestDeterminism:
    def test_thread_count_independence(self, tmp_path):
        # identical CSV bytes with 1 and 2 numba threads
        import os

        env1 = dict(os.environ, NUMBA_NUM_THREADS="1", KAP_CACHE_DIR=str(tmp_path / "cache"))
        env2 = dict(os.environ, NUMBA_NUM_THREADS="2", KAP_CACHE_DIR=str(tmp_path / "cache"))
        code = (
            "from kap.experiments import default_config, run_experiment;"
            "cfg = default_config('sod', n_x=16, n_v=16, eps=1e-1, t_end=0.01, output_interval=0.01,"
            " out_dir=OUT); run_experiment(cfg)"
        )
        for env, out in ((env1, "a"), (env2, "b")):
            r = subprocess.run(
                [sys.executable, "-c", code.replace("OUT", repr(str(tmp_path / out)))],
                env=env,
                capture_output=True,
                text=True,
            )
            assert r.returncode == 0, r.stderr
        a = (tmp_path / "a" / "diag_0001.csv").read_bytes()
        b = (tmp_path / "b" / "diag_0001.csv").read_bytes()
        assert a == b
