"""Sparse regression and the discrepancy-modeling pipeline.

The solver is sequentially thresholded least squares (STLSQ): alternate a
full least-squares solve on the active term set with hard-thresholding of
small coefficients until the support stabilizes.  This is the standard
deterministic realization of sparsity-promoting regression for dynamics
identification; the threshold acts as a hard cutoff, not an l1 weight.

The pipeline composes numerical differentiation of measured trajectories,
subtraction of a nominal model's prediction, candidate-library evaluation,
and STLSQ into a fitted discrepancy model that can be added back onto the
nominal model to form a hybrid vector field.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import library as lib_mod
from .dynamics import DynamicsModel
from .errors import DataError, DimensionError, ParameterError
from .library import CandidateLibrary
from .numerics import (
    DIFF_CENTRAL,
    DerivativeEstimate,
    TimeSeries,
    differentiate,
    smooth_savitzky_golay,
    solve_least_squares,
)


@dataclass(frozen=True)
class SolverConfig:
    """STLSQ settings; ``threshold`` is the hard pruning cutoff."""

    threshold: float = 0.05
    max_iters: int = 20
    normalize: bool = True
    min_rows_per_term: int = 10
    residual_ceiling: float | None = None


@dataclass(frozen=True)
class DerivativeConfig:
    """How the pipeline turns sampled states into derivative estimates.

    With ``smooth_window`` set, states are Savitzky-Golay smoothed first and
    the smoothed states are used everywhere downstream (differentiation,
    nominal-model evaluation, library evaluation).
    """

    method: str = DIFF_CENTRAL
    window: int = 51
    poly_order: int = 3
    smooth_window: int | None = None
    smooth_poly_order: int = 3


@dataclass(frozen=True)
class SparseCoefficients:
    """STLSQ result: one sparse coefficient column per target dimension.

    ``xi`` is (p, n) in physical scale; entries outside ``active`` are
    exactly zero.  ``column_scales`` holds the per-column RMS scales that
    were active during thresholding (all ones when normalization was off).
    """

    xi: np.ndarray
    term_names: tuple[str, ...]
    threshold: float
    active: np.ndarray
    all_pruned: tuple[bool, ...]
    iterations: tuple[int, ...]
    column_scales: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        active = np.asarray(self.active, dtype=bool)
        if xi.shape != active.shape:
            raise DimensionError("coefficient and active-mask shapes differ")
        if np.any(xi[~active] != 0.0):
            raise ParameterError("inactive coefficients must be exactly zero")
        if np.any(active & (xi == 0.0)):
            raise ParameterError("active mask marks zero coefficients")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "active", active)

    @property
    def n_targets(self) -> int:
        return self.xi.shape[1]

    def active_terms(self, column: int) -> dict[str, float]:
        """Nonzero terms of one target column, name -> coefficient."""
        col = self.xi[:, column]
        return {self.term_names[i]: float(col[i]) for i in np.nonzero(col)[0]}


def stlsq(
    theta: np.ndarray,
    targets: np.ndarray,
    threshold: float,
    max_iters: int = 20,
    normalize: bool = True,
    term_names: tuple[str, ...] | None = None,
) -> SparseCoefficients:
    """Sequentially thresholded least squares, columnwise over the targets.

    When ``normalize`` is on, columns of theta are scaled to unit root mean
    square before solving, the threshold is applied to the scaled
    coefficients (so it compares like-for-like across term families of
    different magnitudes), and coefficients are un-scaled on output.
    Coefficients exactly at the threshold are kept.  A column whose terms
    are all eliminated comes back as zeros with its ``all_pruned`` flag set.
    """
    theta = np.asarray(theta, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(targets)):
        raise DataError("stlsq inputs contain non-finite values")
    if theta.shape[0] != targets.shape[0]:
        raise DimensionError(
            f"theta has {theta.shape[0]} rows but targets have {targets.shape[0]}"
        )
    if threshold < 0:
        raise ParameterError("threshold must be non-negative")
    if max_iters < 1:
        raise ParameterError("max_iters must be at least 1")
    m, p = theta.shape
    n = targets.shape[1]
    if m <= p:
        warnings.warn(
            f"stlsq is underdetermined-ish: {m} rows for {p} candidate terms",
            stacklevel=2,
        )
    if term_names is None:
        term_names = tuple(f"theta{j}" for j in range(p))
    if len(term_names) != p:
        raise DimensionError("term_names length does not match theta columns")

    if normalize:
        scales = np.sqrt(np.mean(theta**2, axis=0))
        scales[scales == 0.0] = 1.0
    else:
        scales = np.ones(p)
    theta_s = theta / scales

    xi = np.zeros((p, n))
    all_pruned = []
    iterations = []
    for col in range(n):
        y = targets[:, col]
        active = np.ones(p, dtype=bool)
        w = np.zeros(p)
        iters = 0
        for _ in range(max_iters):
            iters += 1
            w = np.zeros(p)
            w[active] = solve_least_squares(theta_s[:, active], y).solution
            keep = active & (np.abs(w) >= threshold)
            if keep.sum() == active.sum():
                break
            active = keep
            if not active.any():
                break
        w[~active] = 0.0
        xi[:, col] = w / scales
        all_pruned.append(not active.any())
        iterations.append(iters)

    active_mask = xi != 0.0
    return SparseCoefficients(
        xi=xi,
        term_names=tuple(term_names),
        threshold=threshold,
        active=active_mask,
        all_pruned=tuple(all_pruned),
        iterations=tuple(iterations),
        column_scales=scales,
    )


@dataclass(frozen=True)
class FitDiagnostics:
    residual_rmse: tuple[float, ...]
    condition_number: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class DiscrepancyModel:
    """A fitted sparse map from (state, control) to a model-error vector."""

    lib: CandidateLibrary
    coefficients: SparseCoefficients
    diagnostics: FitDiagnostics

    def __post_init__(self):
        if self.lib.size != self.coefficients.xi.shape[0]:
            raise DimensionError(
                "library term count does not match coefficient rows"
            )

    @property
    def n_targets(self) -> int:
        return self.coefficients.n_targets

    def predict(self, X: np.ndarray, U: np.ndarray | None = None) -> np.ndarray:
        """Discrepancy values at the given samples, shape (m, n_targets)."""
        theta = lib_mod.evaluate(self.lib, X, U)
        return theta @ self.coefficients.xi

    def predict_one(self, x: np.ndarray, u: np.ndarray | None = None) -> np.ndarray:
        X = np.asarray(x, dtype=float)[None, :]
        U = None if u is None else np.asarray(u, dtype=float).reshape(1, -1)
        return self.predict(X, U)[0]


def assemble_discrepancy_targets(
    data: TimeSeries,
    xdot: DerivativeEstimate,
    nominal: DynamicsModel,
) -> np.ndarray:
    """Rowwise model-error matrix: xdot_i - f_nominal(x_i, u_i)."""
    if xdot.values.shape != data.states.shape:
        raise DimensionError(
            f"derivative shape {xdot.values.shape} does not match states "
            f"{data.states.shape}"
        )
    if nominal.control_dim != data.control_dim:
        raise DimensionError(
            f"nominal model expects control dim {nominal.control_dim}, "
            f"data has {data.control_dim}"
        )
    m = data.n_samples
    out = np.empty_like(data.states)
    for i in range(m):
        u_i = data.controls[i] if data.controls is not None else None
        try:
            fm = nominal.f(data.states[i], u_i)
        except Exception as exc:
            raise DataError(f"nominal model evaluation failed at row {i}: {exc}") from exc
        if not np.all(np.isfinite(fm)):
            raise DataError(f"nominal model returned non-finite values at row {i}")
        out[i] = xdot.values[i] - fm
    return out


def fit_discrepancy(
    data: TimeSeries,
    nominal: DynamicsModel,
    lib: CandidateLibrary,
    solver: SolverConfig = SolverConfig(),
    derivative: DerivativeConfig = DerivativeConfig(),
    row_mask: np.ndarray | None = None,
) -> DiscrepancyModel:
    """End-to-end discrepancy fit from a measured trajectory.

    Smooths the measured states when configured, differentiates them,
    subtracts the nominal model's prediction rowwise, evaluates the
    candidate library on the (smoothed) states and controls, and solves the
    sparse regression.  ``row_mask`` selects which samples enter the
    regression (differentiation always sees the full series); use it to drop
    samples with unreliable derivative estimates.  Data-volume and
    residual-quality problems raise warnings, not errors.
    """
    fit_warnings: list[str] = []
    n_rows = data.n_samples if row_mask is None else int(np.sum(row_mask))
    if n_rows < solver.min_rows_per_term * lib.size:
        msg = (
            f"only {n_rows} rows for {lib.size} terms; "
            f"recommend at least {solver.min_rows_per_term * lib.size}"
        )
        warnings.warn(msg, stacklevel=2)
        fit_warnings.append(msg)

    series = data
    if derivative.smooth_window:
        series = smooth_savitzky_golay(
            data, derivative.smooth_window, derivative.smooth_poly_order
        )
    xdot = differentiate(
        series, derivative.method, derivative.window, derivative.poly_order
    )
    targets = assemble_discrepancy_targets(series, xdot, nominal)
    theta = lib_mod.evaluate(lib, series.states, series.controls)
    if row_mask is not None:
        row_mask = np.asarray(row_mask, dtype=bool)
        if row_mask.shape[0] != data.n_samples:
            raise DimensionError("row_mask length does not match the series")
        targets = targets[row_mask]
        theta = theta[row_mask]
    coeffs = stlsq(
        theta,
        targets,
        solver.threshold,
        solver.max_iters,
        solver.normalize,
        term_names=tuple(lib.names),
    )

    residuals = theta @ coeffs.xi - targets
    rmse = tuple(float(v) for v in np.sqrt(np.mean(residuals**2, axis=0)))
    if solver.residual_ceiling is not None:
        bad = [i for i, v in enumerate(rmse) if v > solver.residual_ceiling]
        if bad:
            msg = (
                f"residual RMSE exceeds ceiling {solver.residual_ceiling} "
                f"in target columns {bad}"
            )
            warnings.warn(msg, stacklevel=2)
            fit_warnings.append(msg)
    condition = float(np.linalg.cond(theta / coeffs.column_scales))
    diags = FitDiagnostics(rmse, condition, tuple(fit_warnings))
    return DiscrepancyModel(lib, coeffs, diags)


@dataclass(frozen=True)
class HybridModel:
    """Nominal analytic model plus fitted discrepancy, evaluated as a sum."""

    nominal: DynamicsModel
    discrepancy: DiscrepancyModel

    def __post_init__(self):
        if self.nominal.state_dim != self.discrepancy.lib.state_dim:
            raise DimensionError("nominal and discrepancy state dims differ")
        if self.nominal.control_dim != self.discrepancy.lib.control_dim:
            raise DimensionError("nominal and discrepancy control dims differ")
        if self.discrepancy.n_targets != self.nominal.state_dim:
            raise DimensionError(
                "discrepancy must predict one target per state dimension"
            )


def evaluate_hybrid(h: HybridModel, x: np.ndarray, u: np.ndarray | None = None) -> np.ndarray:
    """State derivative of the corrected model: f_nominal + fitted residual."""
    out = np.array(h.nominal.f(x, u), dtype=float)
    terms = h.discrepancy.lib.terms
    xi = h.discrepancy.coefficients.xi
    uu = None if u is None else np.atleast_1d(u)
    for p_idx, col in zip(*np.nonzero(xi)):
        out[col] += xi[p_idx, col] * terms[p_idx].evaluate_scalar(x, uu)
    return out


def hybrid_dynamics(h: HybridModel) -> DynamicsModel:
    """Package a hybrid model as a DynamicsModel for integration/optimization."""
    xi = h.discrepancy.coefficients.xi
    lib = h.discrepancy.lib
    terms = lib.terms
    nominal_f = h.nominal.f
    nominal_jac = h.nominal.jacobian
    active = list(zip(*np.nonzero(xi)))

    def f(x, u):
        out = np.array(nominal_f(x, u), dtype=float)
        uu = None if u is None else np.atleast_1d(u)
        for p_idx, col in active:
            out[col] += xi[p_idx, col] * terms[p_idx].evaluate_scalar(x, uu)
        return out

    jac = None
    if nominal_jac is not None:

        def jac(X, U):
            A, B = nominal_jac(X, U)
            d_state, d_control = lib_mod.evaluate_jacobian(lib, X, U)
            A = A + np.einsum("mpj,pc->mcj", d_state, xi)
            if lib.control_dim > 0:
                B = B + np.einsum("mpj,pc->mcj", d_control, xi)
            return A, B

    return DynamicsModel(
        f=f,
        state_dim=h.nominal.state_dim,
        control_dim=h.nominal.control_dim,
        name=f"hybrid({h.nominal.name})",
        jacobian=jac,
    )


# --------------------------------------------------------------------------
# Report serialization


def model_to_report(model: DiscrepancyModel) -> dict:
    """JSON-ready report of a fitted discrepancy model; round-trips losslessly."""
    c = model.coefficients
    return {
        "library": lib_mod.library_to_dict(model.lib),
        "term_names": list(c.term_names),
        "coefficients": c.xi.tolist(),
        "threshold": c.threshold,
        "active": c.active.tolist(),
        "all_pruned": list(c.all_pruned),
        "iterations": list(c.iterations),
        "column_scales": c.column_scales.tolist(),
        "diagnostics": {
            "residual_rmse": list(model.diagnostics.residual_rmse),
            "condition_number": model.diagnostics.condition_number,
            "warnings": list(model.diagnostics.warnings),
        },
    }


def model_from_report(report: dict) -> DiscrepancyModel:
    lib = lib_mod.library_from_dict(report["library"])
    coeffs = SparseCoefficients(
        xi=np.asarray(report["coefficients"], dtype=float),
        term_names=tuple(report["term_names"]),
        threshold=float(report["threshold"]),
        active=np.asarray(report["active"], dtype=bool),
        all_pruned=tuple(bool(b) for b in report["all_pruned"]),
        iterations=tuple(int(i) for i in report["iterations"]),
        column_scales=np.asarray(report["column_scales"], dtype=float),
    )
    d = report["diagnostics"]
    diags = FitDiagnostics(
        residual_rmse=tuple(float(v) for v in d["residual_rmse"]),
        condition_number=float(d["condition_number"]),
        warnings=tuple(d.get("warnings", ())),
    )
    return DiscrepancyModel(lib, coeffs, diags)
