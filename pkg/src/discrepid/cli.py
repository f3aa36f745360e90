"""Command-line front end.

Verbs: ``simulate`` (synthetic measurement data), ``fit`` (discrepancy model
from a data CSV), ``validate`` (cross-validation from a held-out initial
condition), ``swingup`` (the full design/playback/fit/re-design experiment),
and ``lambda-sweep`` (refit across a list of thresholds).  ``--config``
accepts a JSON file path or the name of a shipped preset (vdp-param,
vdp-structure, pendulum-energy, pendulum-swingup).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 convergence
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfg_mod
from . import energy as energy_mod
from . import library as lib_mod
from . import sindy, tsio
from .control import (
    SwingUpExperimentConfig,
    closed_loop_discrepancy_experiment,
    switch_row_mask,
)
from .errors import ConfigError, DataError, DiscrepidError
from .numerics import TimeSeries, differentiate, integrate_rk4, smooth_savitzky_golay
from .sindy import HybridModel, fit_discrepancy, hybrid_dynamics, model_from_report, model_to_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4


def _load(args) -> cfg_mod.ExperimentConfig:
    cfg = cfg_mod.parse_config(cfg_mod.load_raw_config(args.config))
    if args.seed is not None:
        cfg = replace(cfg, noise=replace(cfg.noise, seed=args.seed))
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def _add_noise(states: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    if sigma == 0.0:
        return states
    rng = np.random.default_rng(seed)
    return states + rng.normal(0.0, sigma, size=states.shape)


def cmd_simulate(cfg: cfg_mod.ExperimentConfig) -> Path:
    """Integrate the true system and emit noisy measurement data."""
    truth = cfg_mod.truth_model(cfg)
    integ = cfg.integration
    u = None
    if truth.control_dim > 0:
        u = np.zeros((int(round(integ.t_span / integ.dt)), truth.control_dim))
    ts = integrate_rk4(truth, integ.x0, u, t_span=integ.t_span, dt=integ.dt)
    measured = ts.states
    if cfg.experiment == "pendulum-energy":
        measured = measured[:, :2]  # only the angles are observed
    measured = _add_noise(measured, cfg.noise.sigma, cfg.noise.seed)
    out = Path(cfg.output_dir) / "data.csv"
    tsio.write_timeseries_csv(out, TimeSeries(0.0, integ.dt, measured, ts.controls))
    return out


def _fit_any(cfg: cfg_mod.ExperimentConfig, data: TimeSeries, solver=None):
    """Experiment-appropriate fit; returns (model, residual columns, names)."""
    solver = solver or cfg.solver
    if cfg.experiment == "pendulum-energy":
        states = energy_mod.angles_to_state_series(
            data,
            cfg.derivative.smooth_window,
            cfg.derivative.smooth_poly_order,
            cfg.derivative.method,
            cfg.derivative.window,
            cfg.derivative.poly_order,
        )
        lib = cfg_mod.build_library(cfg.library_spec, 4)
        es = energy_mod.compute_energy_series(states, cfg_mod.pendulum_params(cfg))
        result = energy_mod.fit_energy_discrepancy(es, states, lib, solver)
        residuals = np.column_stack([es.deltaH - result.deltaH_fit])
        return result.model, data.t, residuals, ["deltaH_residual"]

    nominal = cfg_mod.nominal_model(cfg)
    lib = cfg_mod.build_library(cfg.library_spec, cfg.state_dim)
    mask = None
    if cfg.experiment == "pendulum-swingup":
        spb = round((cfg.swingup or {}).get("control_dt", 0.01) / cfg.integration.dt)
        mask = switch_row_mask(data.n_samples, spb)
    model = fit_discrepancy(data, nominal, lib, solver, cfg.derivative, row_mask=mask)

    series = data
    if cfg.derivative.smooth_window:
        series = smooth_savitzky_golay(
            data, cfg.derivative.smooth_window, cfg.derivative.smooth_poly_order
        )
    xdot = differentiate(series, cfg.derivative.method, cfg.derivative.window, cfg.derivative.poly_order)
    targets = sindy.assemble_discrepancy_targets(series, xdot, nominal)
    residuals = targets - model.predict(series.states, series.controls)
    names = [f"residual_x{i + 1}" for i in range(residuals.shape[1])]
    return model, data.t, residuals, names


def cmd_fit(cfg: cfg_mod.ExperimentConfig, data_path: str) -> Path:
    """Fit the experiment's discrepancy model from a data CSV."""
    data = tsio.read_timeseries_csv(data_path)
    model, t, residuals, names = _fit_any(cfg, data)
    out_dir = Path(cfg.output_dir)
    model_path = out_dir / "model.json"
    tsio.write_json(model_path, model_to_report(model))
    tsio.write_table_csv(
        out_dir / "residuals.csv",
        ["t"] + names,
        [t] + [residuals[:, i] for i in range(residuals.shape[1])],
    )
    if cfg.experiment == "pendulum-energy":
        _write_energy_csv(cfg, data, model, out_dir / "energy.csv")
    return model_path


def _write_energy_csv(cfg, angles: TimeSeries, model, path) -> None:
    states = energy_mod.angles_to_state_series(
        angles,
        cfg.derivative.smooth_window,
        cfg.derivative.smooth_poly_order,
        cfg.derivative.method,
        cfg.derivative.window,
        cfg.derivative.poly_order,
    )
    es = energy_mod.compute_energy_series(states, cfg_mod.pendulum_params(cfg))
    fit = energy_mod.predict_dissipated_energy(model, states)
    err = energy_mod.energy_error_pct(es.deltaH, fit)
    tsio.write_table_csv(
        path,
        ["t", "H_m", "E0", "deltaH", "deltaH_fit", "error_pct"],
        [es.t, es.H_m, np.full_like(es.t, es.E0), es.deltaH, fit, err],
    )


def _trajectory_rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def cmd_validate(cfg: cfg_mod.ExperimentConfig, model_path: str) -> Path:
    """Cross-validate a fitted model from the held-out initial condition."""
    if cfg.experiment == "pendulum-swingup":
        raise ConfigError("experiment", "validate does not apply to pendulum-swingup; use swingup")
    if cfg.validation is None:
        raise ConfigError("validation", "missing (required for validate)")
    if not Path(model_path).exists():
        raise DataError(f"model file not found: {model_path}")
    model = model_from_report(tsio.read_json(model_path))
    out_dir = Path(cfg.output_dir)
    val = cfg.validation

    if cfg.experiment == "pendulum-energy":
        truth = cfg_mod.truth_model(cfg)
        clean = integrate_rk4(truth, val.x0, t_span=val.t_span, dt=val.dt)
        angles = TimeSeries(
            0.0, val.dt,
            _add_noise(clean.states[:, :2], cfg.noise.sigma, cfg.noise.seed + 1),
        )
        _write_energy_csv(cfg, angles, model, out_dir / "energy_validation.csv")
        states = energy_mod.angles_to_state_series(
            angles, cfg.derivative.smooth_window, cfg.derivative.smooth_poly_order,
            cfg.derivative.method, cfg.derivative.window, cfg.derivative.poly_order,
        )
        es = energy_mod.compute_energy_series(states, cfg_mod.pendulum_params(cfg))
        fit = energy_mod.predict_dissipated_energy(model, states)
        err = energy_mod.energy_error_pct(es.deltaH, fit)
        metrics = out_dir / "validation_metrics.json"
        tsio.write_json(metrics, {"max_abs_error_pct": float(np.max(np.abs(err)))})
        return metrics

    truth = cfg_mod.truth_model(cfg)
    nominal = cfg_mod.nominal_model(cfg)
    hybrid = hybrid_dynamics(HybridModel(nominal, model))
    runs = {}
    for name, m in (("truth", truth), ("nominal", nominal), ("hybrid", hybrid)):
        runs[name] = integrate_rk4(m, val.x0, t_span=val.t_span, dt=val.dt)
        tsio.write_timeseries_csv(out_dir / f"{name}.csv", runs[name])
    rmse = {
        name: _trajectory_rmse(runs[name].states, runs["truth"].states)
        for name in ("nominal", "hybrid")
    }
    metrics = out_dir / "rmse.csv"
    tsio.write_table_csv(
        metrics,
        ["nominal_rmse", "hybrid_rmse"],
        [np.array([rmse["nominal"]]), np.array([rmse["hybrid"]])],
    )
    return metrics


def cmd_swingup(cfg: cfg_mod.ExperimentConfig) -> tuple[Path, bool]:
    """Run the full swing-up discrepancy experiment and write its artifacts."""
    plant = cfg_mod.truth_model(cfg)
    design = cfg_mod.nominal_model(cfg)
    lib = cfg_mod.build_library(cfg.library_spec, 6)
    prob = cfg_mod.swing_up_problem(cfg, design)
    exp = SwingUpExperimentConfig(
        plant=plant,
        design_model=design,
        library=lib,
        problem=prob,
        optimizer=cfg_mod.optimizer_config(cfg),
        solver=cfg.solver,
        derivative=cfg.derivative,
    )
    report = closed_loop_discrepancy_experiment(exp)
    out_dir = Path(cfg.output_dir)
    tsio.write_timeseries_csv(out_dir / "nominal_trajectory.csv", report.nominal_playback)
    tsio.write_timeseries_csv(out_dir / "hybrid_trajectory.csv", report.hybrid_playback)
    success_error = cfg_mod.optimizer_config(cfg).success_error
    payload = {
        "nominal_design": {
            "cost": report.nominal_design.cost,
            "final_error": report.nominal_design.final_error,
            "converged": report.nominal_design.converged,
            "restart_index": report.nominal_design.restart_index,
        },
        "hybrid_design": {
            "cost": report.hybrid_design.cost,
            "final_error": report.hybrid_design.final_error,
            "converged": report.hybrid_design.converged,
            "restart_index": report.hybrid_design.restart_index,
        },
        "playback": {
            "nominal_final_error": report.nominal_final_error,
            "hybrid_final_error": report.hybrid_final_error,
            "nominal_reached_target": report.nominal_final_error <= success_error * 2,
            "hybrid_reached_target": report.hybrid_final_error <= success_error * 2,
        },
        "discrepancy": model_to_report(report.discrepancy),
    }
    report_path = out_dir / "report.json"
    tsio.write_json(report_path, payload)
    converged = report.nominal_design.converged and report.hybrid_design.converged
    return report_path, converged


def cmd_lambda_sweep(cfg: cfg_mod.ExperimentConfig, data_path: str, lambdas: list[float]) -> Path:
    """Refit at each threshold; tabulate active sets, coefficients, residuals."""
    if not lambdas:
        raise ConfigError("lambdas", "must not be empty")
    data = tsio.read_timeseries_csv(data_path)
    entries = []
    rows = []
    for lam in lambdas:
        solver = replace(cfg.solver, threshold=float(lam))
        model, _, residuals, _ = _fit_any(cfg, data, solver=solver)
        c = model.coefficients
        per_col = []
        for col in range(c.n_targets):
            active = c.active_terms(col)
            rms = float(np.sqrt(np.mean(residuals[:, col] ** 2)))
            per_col.append({"active": active, "residual_rmse": rms})
            rows.append((lam, col, len(active), ";".join(sorted(active)), rms))
        entries.append({"threshold": float(lam), "columns": per_col})
    out_dir = Path(cfg.output_dir)
    tsio.write_json(out_dir / "sweep.json", {"sweep": entries})
    sweep_csv = out_dir / "sweep.csv"
    with open(sweep_csv, "w", newline="\n") as fh:
        fh.write("threshold,column,n_active,active_terms,residual_rmse\n")
        for lam, col, n, names, rms in rows:
            fh.write(f"{lam:.17g},{col},{n},{names},{rms:.17g}\n")
    return sweep_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="discrepid",
        description="Sparse discrepancy-model identification experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="config JSON path or preset name")
        p.add_argument("--seed", type=int, default=None, help="override the noise seed")
        p.add_argument("--out", default=None, help="override the output directory")

    common(sub.add_parser("simulate", help="generate synthetic measurement data"))
    p_fit = sub.add_parser("fit", help="fit a discrepancy model from a data CSV")
    common(p_fit)
    p_fit.add_argument("--data", required=True, help="input trajectory CSV")
    p_val = sub.add_parser("validate", help="cross-validate a fitted model")
    common(p_val)
    p_val.add_argument("--model", required=True, help="model report JSON")
    common(sub.add_parser("swingup", help="run the swing-up discrepancy experiment"))
    p_sweep = sub.add_parser("lambda-sweep", help="refit across thresholds")
    common(p_sweep)
    p_sweep.add_argument("--data", required=True, help="input trajectory CSV")
    p_sweep.add_argument(
        "--lambdas", required=True,
        help="comma-separated list of thresholds, e.g. 0.025,0.05,0.075",
    )
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _load(args)
    if args.command == "simulate":
        path = cmd_simulate(cfg)
        print(path)
        return EXIT_OK
    if args.command == "fit":
        path = cmd_fit(cfg, args.data)
        print(path)
        return EXIT_OK
    if args.command == "validate":
        path = cmd_validate(cfg, args.model)
        print(path)
        return EXIT_OK
    if args.command == "swingup":
        path, converged = cmd_swingup(cfg)
        print(path)
        return EXIT_OK if converged else EXIT_CONVERGENCE
    if args.command == "lambda-sweep":
        try:
            lambdas = [float(v) for v in args.lambdas.split(",") if v != ""]
        except ValueError as exc:
            raise ConfigError("lambdas", str(exc)) from exc
        path = cmd_lambda_sweep(cfg, args.data, lambdas)
        print(path)
        return EXIT_OK
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DiscrepidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
