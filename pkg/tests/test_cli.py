import json

import numpy as np
import pytest

from discrepid import cli
from discrepid.config import load_preset
from discrepid.tsio import (
    read_table_csv,
    read_timeseries_csv,
    write_json,
    write_timeseries_csv,
)
from discrepid.errors import CsvFormatError, DataError
from discrepid.numerics import TimeSeries


def write_cfg(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def vdp_cfg(tmp_path, out="out", **overrides):
    raw = load_preset("vdp-param")
    raw["io"] = {"output_dir": str(tmp_path / out)}
    raw.update(overrides)
    return write_cfg(tmp_path, raw)


class TestRoundTrip:
    def test_timeseries_csv_lossless(self, tmp_path):
        rng = np.random.default_rng(0)
        ts = TimeSeries(0.0, 0.01, rng.normal(size=(50, 3)), rng.normal(size=(50, 2)))
        path = tmp_path / "ts.csv"
        write_timeseries_csv(path, ts)
        back = read_timeseries_csv(path)
        assert np.array_equal(back.states, ts.states)
        assert np.array_equal(back.controls, ts.controls)
        assert back.dt == ts.dt

    def test_json_lossless(self, tmp_path):
        payload = {"a": 0.1 + 0.2, "b": [1e-17, 123456789.123456789]}
        path = tmp_path / "x.json"
        write_json(path, payload)
        assert json.loads(path.read_text()) == payload

    def test_nonnumeric_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1\n0.0,1.0\n0.01,oops\n")
        with pytest.raises(CsvFormatError) as exc:
            read_timeseries_csv(path)
        assert exc.value.row == 3
        assert exc.value.column == 2

    def test_irregular_time_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1\n0.0,1.0\n0.01,2.0\n0.03,3.0\n")
        with pytest.raises(DataError):
            read_timeseries_csv(path)


class TestSimulate:
    def test_vdp_row_count(self, tmp_path):
        rc = cli.main(["simulate", "--config", vdp_cfg(tmp_path)])
        assert rc == 0
        header, data = read_table_csv(tmp_path / "out" / "data.csv")
        assert header == ["t", "x1", "x2"]
        assert data.shape[0] == 2501

    def test_determinism_byte_identical(self, tmp_path):
        cfg = vdp_cfg(tmp_path)
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "data.csv").read_bytes()
        b = (tmp_path / "b" / "data.csv").read_bytes()
        assert a == b

    def test_seed_changes_output(self, tmp_path):
        cfg = vdp_cfg(tmp_path)
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
        cli.main(["simulate", "--config", cfg, "--seed", "99", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "data.csv").read_bytes() != (tmp_path / "b" / "data.csv").read_bytes()

    def test_invalid_t_span_exit_code(self, tmp_path, capsys):
        raw = load_preset("vdp-param")
        raw["integration"]["t_span"] = 0.0
        rc = cli.main(["simulate", "--config", write_cfg(tmp_path, raw)])
        assert rc == cli.EXIT_CONFIG
        assert "t_span" in capsys.readouterr().err


class TestFitAndValidate:
    @pytest.fixture()
    def fitted(self, tmp_path):
        cfg = vdp_cfg(tmp_path)
        assert cli.main(["simulate", "--config", cfg]) == 0
        data = str(tmp_path / "out" / "data.csv")
        assert cli.main(["fit", "--config", cfg, "--data", data]) == 0
        return cfg, tmp_path / "out"

    def test_fit_recovers_expected_terms(self, fitted):
        _, out = fitted
        report = json.loads((out / "model.json").read_text())
        xi = np.asarray(report["coefficients"])
        names = report["term_names"]
        active2 = {names[i] for i in np.nonzero(xi[:, 1])[0]}
        assert active2 == {"x2", "x1^2*x2"}
        assert not np.any(xi[:, 0])
        assert (out / "residuals.csv").exists()

    def test_fit_zero_mismatch_empty_support(self, tmp_path):
        raw = load_preset("vdp-param")
        raw["system"]["alpha_nominal"] = raw["system"]["alpha"]
        raw["io"] = {"output_dir": str(tmp_path / "out")}
        cfg = write_cfg(tmp_path, raw)
        cli.main(["simulate", "--config", cfg])
        cli.main(["fit", "--config", cfg, "--data", str(tmp_path / "out" / "data.csv")])
        report = json.loads((tmp_path / "out" / "model.json").read_text())
        assert not np.any(np.asarray(report["coefficients"]))

    def test_validate_ratio(self, fitted):
        cfg, out = fitted
        rc = cli.main(["validate", "--config", cfg, "--model", str(out / "model.json")])
        assert rc == 0
        _, data = read_table_csv(out / "rmse.csv")
        nominal_rmse, hybrid_rmse = data[0]
        assert hybrid_rmse <= nominal_rmse / 20.0
        assert (out / "truth.csv").exists()
        assert (out / "hybrid.csv").exists()

    def test_validate_truth_against_itself(self, tmp_path):
        raw = load_preset("vdp-param")
        raw["system"]["alpha_nominal"] = raw["system"]["alpha"]
        raw["io"] = {"output_dir": str(tmp_path / "out")}
        cfg = write_cfg(tmp_path, raw)
        cli.main(["simulate", "--config", cfg])
        cli.main(["fit", "--config", cfg, "--data", str(tmp_path / "out" / "data.csv")])
        cli.main(["validate", "--config", cfg, "--model", str(tmp_path / "out" / "model.json")])
        _, data = read_table_csv(tmp_path / "out" / "rmse.csv")
        assert data[0, 1] <= 1e-10  # hybrid == truth here

    def test_validate_missing_model_file(self, fitted, capsys):
        cfg, out = fitted
        rc = cli.main(["validate", "--config", cfg, "--model", str(out / "nope.json")])
        assert rc == cli.EXIT_DATA
        assert "nope.json" in capsys.readouterr().err

    def test_fit_bad_csv_exit_code(self, fitted, capsys):
        cfg, out = fitted
        bad = out / "bad.csv"
        bad.write_text("t,x1,x2\n0.0,1.0,x\n0.01,1.0,2.0\n")
        rc = cli.main(["fit", "--config", cfg, "--data", str(bad)])
        assert rc == cli.EXIT_DATA
        err = capsys.readouterr().err
        assert "row 2" in err and "column 3" in err


class TestLambdaSweep:
    def test_sweep_table(self, tmp_path):
        cfg = vdp_cfg(tmp_path)
        cli.main(["simulate", "--config", cfg])
        data = str(tmp_path / "out" / "data.csv")
        rc = cli.main([
            "lambda-sweep", "--config", cfg, "--data", data,
            "--lambdas", "0.025,0.05,0.075",
        ])
        assert rc == 0
        sweep = json.loads((tmp_path / "out" / "sweep.json").read_text())
        actives = [
            tuple(sorted(col["active"])) for entry in sweep["sweep"] for col in entry["columns"]
        ]
        # identical active sets for each target column across the sweep
        assert actives[0::2] == [actives[0]] * 3
        assert actives[1::2] == [actives[1]] * 3

    def test_zero_threshold_matches_least_squares(self, tmp_path):
        from discrepid import sindy
        from discrepid.config import build_library, nominal_model, parse_config
        from discrepid.numerics import differentiate, smooth_savitzky_golay, solve_least_squares
        import discrepid.library as lib_mod

        cfg_path = vdp_cfg(tmp_path)
        cli.main(["simulate", "--config", cfg_path])
        data_path = str(tmp_path / "out" / "data.csv")
        rc = cli.main(["lambda-sweep", "--config", cfg_path, "--data", data_path, "--lambdas", "0"])
        assert rc == 0
        sweep = json.loads((tmp_path / "out" / "sweep.json").read_text())

        cfg = parse_config(json.loads(open(cfg_path).read()))
        data = read_timeseries_csv(data_path)
        series = smooth_savitzky_golay(data, cfg.derivative.smooth_window, cfg.derivative.smooth_poly_order)
        xdot = differentiate(series, "central")
        lib = build_library(cfg.library_spec, 2)
        theta = lib_mod.evaluate(lib, series.states)
        targets = sindy.assemble_discrepancy_targets(series, xdot, nominal_model(cfg))
        ls = solve_least_squares(theta, targets).solution
        for col_idx, col in enumerate(sweep["sweep"][0]["columns"]):
            for name, value in col["active"].items():
                assert abs(value - ls[lib.names.index(name), col_idx]) < 1e-10

    def test_huge_threshold_empties_support(self, tmp_path):
        cfg = vdp_cfg(tmp_path)
        cli.main(["simulate", "--config", cfg])
        data = str(tmp_path / "out" / "data.csv")
        cli.main(["lambda-sweep", "--config", cfg, "--data", data, "--lambdas", "50.0"])
        sweep = json.loads((tmp_path / "out" / "sweep.json").read_text())
        for col in sweep["sweep"][0]["columns"]:
            assert col["active"] == {}


class TestSwingupSmoke:
    def test_report_written_and_round_trips(self, tmp_path):
        # tiny zero-mismatch regulation problem exercises the full command
        raw = load_preset("pendulum-swingup")
        raw["system"]["mismatch"] = False
        raw["integration"]["t_span"] = 0.5
        raw["integration"]["x0"] = [0.03, -0.02, 0.0, 0.0, 0.0, 0.0]
        raw["swingup"]["optimizer"].update({"restarts": 1, "max_iters": 150, "success_error": 0.05})
        raw["io"] = {"output_dir": str(tmp_path / "out")}
        cfg = write_cfg(tmp_path, raw)
        rc = cli.main(["swingup", "--config", cfg])
        assert rc == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["nominal_design"]["converged"]
        assert report["hybrid_design"]["converged"]
        assert json.loads(json.dumps(report)) == report
        traj = read_timeseries_csv(tmp_path / "out" / "nominal_trajectory.csv")
        assert traj.state_dim == 6
        assert traj.control_dim == 1
