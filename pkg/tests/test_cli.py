import csv
import json
import math

import numpy as np
import pytest

from vortexlp.cli import main


def run(tmp_path, command, config=None, preset=None, extra=()):
    argv = [command]
    if config is not None:
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    else:
        argv += ["--preset", preset]
    out = tmp_path / "out"
    argv += ["--out", str(out), *extra]
    code = main(argv)
    return code, out


def _maybe_float(v):
    try:
        return float(v)
    except ValueError:
        return v


def read_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_maybe_float(v) for v in row] for row in reader]
    return header, rows


BASE_PAIR = {
    "charges": [1, 1],
    "c": 0.1,
    "positions": [[0.4, 0.0], [-0.3, 0.1]],
    "t_span": [0.0, 5.0],
    "samples": 51,
    "integrator": {"rel_tol": 1e-12, "abs_tol": 1e-12, "max_step": 0.5,
                   "scheme": "rk45"},
}


class TestSimulate:
    def test_single_vortex_period(self, tmp_path):
        code, out = run(tmp_path, "simulate", preset="single_vortex")
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        expected = 2.0 * math.pi * (1.0 - 0.25)
        assert summary["precession_period"] == pytest.approx(expected, abs=1e-6)
        assert summary["energy_drift_max"] < 1e-8

    def test_dipole_impulse_column_vanishes(self, tmp_path):
        code, out = run(tmp_path, "simulate", preset="pair_dipole")
        assert code == 0
        header, rows = read_csv(out / "trajectory.csv")
        c_col = header.index("C")
        assert all(abs(row[c_col]) < 1e-9 for row in rows)

    def test_malformed_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["simulate", "--config", str(bad),
                     "--out", str(tmp_path / "o")]) == 1

    def test_missing_positions(self, tmp_path):
        config = dict(BASE_PAIR)
        config.pop("positions")
        code, _ = run(tmp_path, "simulate", config=config)
        assert code == 1

    def test_both_parameterizations_rejected(self, tmp_path):
        config = dict(BASE_PAIR)
        config["physical"] = {"mu": 1.0, "omega_tr": 1.0, "b": 1.35}
        code, _ = run(tmp_path, "simulate", config=config)
        assert code == 1

    def test_physical_parameterization(self, tmp_path):
        config = dict(BASE_PAIR)
        config.pop("c")
        config["physical"] = {"mu": 1.0, "omega_tr": 1.0, "b": 1.35}
        code, out = run(tmp_path, "simulate", config=config)
        assert code == 0

    def test_singularity_abort_writes_truncated_csv(self, tmp_path):
        config = dict(BASE_PAIR)
        config["t_span"] = [0.0, 20.0]
        config["samples"] = 0
        config["guards"] = {"eps_bound": 0.55}  # forces a mid-run violation
        code, out = run(tmp_path, "simulate", config=config)
        assert code == 2
        summary = json.loads((out / "summary.json").read_text())
        assert summary["truncated"]
        assert 0.0 < summary["abort_time"] < 20.0
        header, rows = read_csv(out / "trajectory.csv")
        assert rows  # partial trajectory was still written

    def test_deterministic_output(self, tmp_path):
        _, out1 = run(tmp_path, "simulate", config=BASE_PAIR)
        first = (out1 / "trajectory.csv").read_bytes()
        _, out2 = run(tmp_path, "simulate", config=BASE_PAIR)
        assert (out2 / "trajectory.csv").read_bytes() == first


class TestReduce:
    def test_dipole_columns(self, tmp_path):
        code, out = run(tmp_path, "reduce", preset="pair_dipole")
        assert code == 0
        header, rows = read_csv(out / "reduced.csv")
        c_col = header.index("C")
        r_col = header.index("rankres_inf")
        c_values = [row[c_col] for row in rows]
        assert max(abs(v - c_values[0]) for v in c_values) <= 1e-9
        assert all(row[r_col] <= 1e-8 for row in rows)
        summary = json.loads((out / "summary.json").read_text())
        assert summary["co_deviation_max"] <= 1e-6

    def test_accepts_direct_coordinates(self, tmp_path):
        config = {
            "charges": [1, 1],
            "c": 0.1,
            "mu0": [0.16, 0.09, -0.12, 0.0],
            "t_span": [0.0, 2.0],
            "samples": 21,
        }
        code, out = run(tmp_path, "reduce", config=config)
        assert code == 0
        header, rows = read_csv(out / "reduced.csv")
        assert len(rows) == 21


class TestEquilibria:
    def test_pair_b_reports_on_curve(self, tmp_path):
        code, out = run(tmp_path, "equilibria", preset="curve_pair_b")
        assert code == 0
        reports = json.loads((out / "equilibria.json").read_text())["reports"]
        assert len(reports) >= 19
        for report in reports:
            assert report["rhs_residual"] < 1e-12

    def test_dipole_curve_reports(self, tmp_path):
        code, out = run(tmp_path, "equilibria", preset="curve_dipole")
        assert code == 0
        reports = json.loads((out / "equilibria.json").read_text())["reports"]
        for report in reports:
            assert report["rhs_residual"] < 1e-12
            m = report["mu0"]
            assert abs(m[0] * m[1] - m[2] ** 2 - m[3] ** 2) < 1e-12

    def test_equilateral_report(self, tmp_path):
        code, out = run(tmp_path, "equilibria", preset="equilibrium_equilateral3")
        assert code == 0
        report = json.loads((out / "equilibria.json").read_text())["reports"][0]
        assert report["rhs_residual"] < 1e-13
        assert report["ec_verdict"] == "LinearlyUnstable"  # F2(0.2, 0.5) > 0

    def test_numeric_bad_guess_fails_cleanly(self, tmp_path, capsys):
        config = {
            "charges": [1, 1],
            "c": 0.1,
            "equilibria": {
                "kind": "numeric",
                "guess_positions": [[0.5, 0.0], [-0.4, 0.2]],
                "omega_guess": 80.0,
            },
        }
        code, _ = run(tmp_path, "equilibria", config=config)
        captured = capsys.readouterr()
        assert code == 2
        assert "runtime abort" in captured.err

    def test_numeric_good_guess(self, tmp_path):
        config = {
            "charges": [1, 1, 1],
            "c": 0.2,
            "equilibria": {
                "kind": "numeric",
                "guess_positions": [[0.4, 0.0], [-0.2, 0.35], [-0.2, -0.35]],
                "omega_guess": 2.4,
            },
        }
        code, out = run(tmp_path, "equilibria", config=config)
        assert code == 0
        report = json.loads((out / "equilibria.json").read_text())["reports"][0]
        assert report["newton_residual"] < 1e-11
        assert report["rhs_residual"] < 1e-11


class TestStability:
    def test_stable_point(self, tmp_path):
        code, out = run(tmp_path, "stability", preset="stability_pair_a")
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["ec_verdict"] == "CertifiedStable"
        assert report["closed_form_values"]["g2"] < 0

    def test_unstable_point(self, tmp_path):
        config = {"charges": [1, 1], "c": 0.1,
                  "family": {"kind": "pair_a", "r": 0.5}}
        code, out = run(tmp_path, "stability", config=config)
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["ec_verdict"] == "LinearlyUnstable"

    def test_direct_coordinates(self, tmp_path):
        config = {"charges": [1, 1], "c": 0.1, "mu0": [0.09, 0.09, -0.09, 0.0]}
        code, out = run(tmp_path, "stability", config=config)
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["ec_verdict"] == "CertifiedStable"


class TestSweep:
    def test_small_center_square_sweep(self, tmp_path):
        config = {
            "charges": [1, 1, 1, 1],
            "c": 0.1,
            "family": {"kind": "equilateral_center4"},
            "grid": {"param1": {"min": 0.05, "max": 0.6, "count": 8},
                     "param2": {"min": 0.2, "max": 0.8, "count": 8}},
        }
        code, out = run(tmp_path, "sweep", config=config)
        assert code == 0
        header, rows = read_csv(out / "sweep.csv")
        assert len(rows) == 64
        meta = json.loads((out / "sweep_meta.json").read_text())
        assert meta["criterion"] == "F6"
        assert meta["param_names"] == ["c", "r"]

    def test_unknown_preset(self, tmp_path):
        assert main(["sweep", "--preset", "nope",
                     "--out", str(tmp_path / "o")]) == 1
