import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conspart import cli
from conspart.engine import MergeError
from conspart.sampling import gaussian_cosine


def write_config(tmp_path, **cfg):
    cfg.setdefault("output_dir", str(tmp_path / "out"))
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=20))
def test_snapshot_round_trip_is_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("snap") / "s.csv"
    x = np.sort(np.array(values))
    u = np.array(values)[::-1] / 3.0
    flags = np.arange(x.size) % 2 == 0
    cli.write_snapshot(path, x, u, flags, ~flags)
    back = cli.read_snapshot(path)
    np.testing.assert_array_equal(back["x"], x)
    np.testing.assert_array_equal(back["u"], u)
    np.testing.assert_array_equal(back["is_shock"], flags)
    np.testing.assert_array_equal(back["is_inflection"], ~flags)


class TestRun:
    def test_quartic_snapshots(self, tmp_path):
        cfg = write_config(tmp_path, problem="quartic", n=100, t_end=10.0,
                           output_times=[0.0, 1.0, 10.0])
        assert cli.main(["run", str(cfg)]) == 0
        out = tmp_path / "out"
        files = sorted(out.glob("snapshot_*.csv"))
        assert len(files) == 3
        assert list(read_csv(files[0])[0]) == list(cli.SNAPSHOT_COLUMNS)
        manifest = json.loads((out / "manifest.json").read_text())
        for snap in manifest["snapshots"]:
            assert abs(snap["area_drift_corrected_rel"]) <= 1e-10
            assert snap["tv_drift"] <= 1e-12
        assert (out / "events.jsonl").exists()

    def test_zero_duration_equals_sampling(self, tmp_path):
        cfg = write_config(tmp_path, problem="quartic", n=50, t_end=0.0)
        assert cli.main(["run", str(cfg)]) == 0
        snap = cli.read_snapshot(tmp_path / "out" / "snapshot_000.csv")
        ic = gaussian_cosine()
        np.testing.assert_allclose(snap["x"], np.linspace(-4, 4, 50), atol=1e-15)
        np.testing.assert_array_equal(snap["u"], ic.u0(snap["x"]))

    def test_riemann_shock_position(self, tmp_path):
        cfg = write_config(tmp_path, flux="burgers", ic="riemann", u_left=1.0, u_right=0.0,
                           x0=0.5, domain=[-3.0, 3.0], n=25, t_end=2.0)
        assert cli.main(["run", str(cfg)]) == 0
        snap = cli.read_snapshot(tmp_path / "out" / "snapshot_000.csv")
        k = np.nonzero(np.diff(snap["x"]) == 0)[0]
        assert len(k) == 1
        assert snap["x"][k[0]] == pytest.approx(1.5, abs=1e-12)
        assert (snap["u"][k[0]], snap["u"][k[0] + 1]) == (1.0, 0.0)


class TestSweeps:
    def test_converge_columns_and_orders(self, tmp_path):
        cfg = write_config(tmp_path, problem="quartic", t_end=1.0)
        assert cli.main(["converge", str(cfg), "--n", "50,100,200"]) == 0
        rows = read_csv(tmp_path / "out" / "convergence.csv")
        assert list(rows[0]) == list(cli.CONVERGENCE_COLUMNS)
        assert [int(r["n"]) for r in rows] == [50, 100, 200]
        orders = json.loads((tmp_path / "out" / "orders.json").read_text())["orders"]
        assert orders["equidistant"]["err_post"] > 1.8

    def test_compare_self_check_is_zero(self, tmp_path):
        cfg = write_config(tmp_path, problem="quartic", t_end=1.0)
        assert cli.main(["compare", str(cfg), "--n", "50,100", "--self-check"]) == 0
        rows = read_csv(tmp_path / "out" / "comparison.csv")
        assert all(float(r["err_fv_self"]) == 0.0 for r in rows)
        assert all(float(r["err_particle"]) < float(r["err_fv"]) for r in rows)

    def test_sample(self, tmp_path):
        cfg = write_config(tmp_path, problem="quartic")
        assert cli.main(["sample", str(cfg), "--n", "100,200,400"]) == 0
        rows = read_csv(tmp_path / "out" / "sampling.csv")
        err = {(int(r["n"]), r["mode"]): float(r["err"]) for r in rows}
        for n in (100, 200, 400):
            assert err[n, "adaptive"] < err[n, "equidistant"]

    def test_parallel_workers(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.WORKERS_ENV, "2")
        cfg = write_config(tmp_path, problem="riemann-shock")
        assert cli.main(["converge", str(cfg), "--n", "20,40,80"]) == 0
        assert len(read_csv(tmp_path / "out" / "convergence.csv")) == 3


class TestExitCodes:
    def test_unknown_key(self, tmp_path):
        assert cli.main(["run", str(write_config(tmp_path, problem="quartic", colour=1))]) == 2

    def test_bad_values(self, tmp_path):
        assert cli.main(["run", str(write_config(tmp_path, problem="quartic", n=1))]) == 2
        assert cli.main(["run", str(write_config(tmp_path, problem="quartic", t_end=1.0,
                                                 output_times=[2.0]))]) == 2
        assert cli.main(["run", str(write_config(tmp_path, problem="nope"))]) == 2

    def test_missing_file(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "missing.json")]) == 2

    def test_bad_arguments(self):
        assert cli.main(["frobnicate"]) == 2

    def test_solver_abort(self, tmp_path, monkeypatch):
        def boom(*args, **kw):
            raise MergeError("entropy fix did not converge")

        monkeypatch.setattr(cli, "simulate", boom)
        assert cli.main(["run", str(write_config(tmp_path, problem="quartic"))]) == 3

    def test_module_entry_point(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        proc = subprocess.run([sys.executable, "-m", "conspart", "run", str(path)],
                              capture_output=True, text=True)
        assert proc.returncode == 2
        assert "configuration error" in proc.stderr
