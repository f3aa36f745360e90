"""Energy-dissipation identification for the locked-cart pendulum.

The conservative energy H = T + V, evaluated on measured coordinates, decays
under joint friction.  The dissipated energy is referenced to the energy at
the first sample, deltaH(t) = E0 - H(t), and fitted as an instantaneous
function of the measured state with sparse regression.  The true dissipated
energy is a path integral of the frictional power; modeling it as a state
function works exactly here because deltaH is, by construction, E0 minus
the (state-function) conservative energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import library as lib_mod
from .errors import DataError, DimensionError, ParameterError
from .library import CandidateLibrary, TermSpec, build_fourier_library, merge_libraries
from .numerics import (
    TimeSeries,
    cumulative_trapezoid,
    differentiate,
    smooth_savitzky_golay,
)
from .sindy import DiscrepancyModel, SolverConfig, stlsq, FitDiagnostics
from .systems import PendulumParams, dissipation_power, energy_components


@dataclass(frozen=True)
class EnergySeries:
    """Measured conservative energy and dissipated energy per sample.

    Invariants: deltaH = E0 - H_m elementwise and deltaH[0] = 0, with E0
    the energy at the first sample.
    """

    t: np.ndarray
    H_m: np.ndarray
    E0: float
    deltaH: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        H = np.asarray(self.H_m, dtype=float)
        d = np.asarray(self.deltaH, dtype=float)
        if not (t.shape == H.shape == d.shape):
            raise DimensionError("t, H_m and deltaH must have equal lengths")
        if not np.array_equal(d, self.E0 - H):
            raise ParameterError("deltaH must equal E0 - H_m exactly")
        if d[0] != 0.0:
            raise ParameterError("deltaH must start at zero")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "H_m", H)
        object.__setattr__(self, "deltaH", d)


def compute_energy_series(ts: TimeSeries, p: PendulumParams) -> EnergySeries:
    """Energy series of a measured pendulum trajectory.

    ``ts`` must carry the four columns [phi1, phi2, dphi1, dphi2] (angles
    plus derived angular velocities).  E0 is the conservative energy at the
    first sample.
    """
    if ts.state_dim != 4:
        raise DimensionError(
            f"expected 4 state columns [phi1, phi2, dphi1, dphi2], got {ts.state_dim}"
        )
    X = ts.states
    T, V = energy_components(X[:, 0], X[:, 1], X[:, 2], X[:, 3], p)
    H = T + V
    E0 = float(H[0])
    return EnergySeries(ts.t, H, E0, E0 - H)


def dissipated_energy_quadrature(ts: TimeSeries, p: PendulumParams) -> np.ndarray:
    """Trapezoid quadrature of the frictional power along the trajectory.

    Independent route to the dissipated energy; on clean data it must agree
    with the energy-difference route to quadrature accuracy.
    """
    if ts.state_dim != 4:
        raise DimensionError("expected 4 state columns [phi1, phi2, dphi1, dphi2]")
    power = dissipation_power(ts.states[:, 2], ts.states[:, 3], p)
    return cumulative_trapezoid(power, ts.dt)


def angles_to_state_series(
    angles: TimeSeries,
    smooth_window: int | None = 51,
    smooth_poly_order: int = 3,
    diff_method: str = "central",
    diff_window: int = 51,
    diff_poly_order: int = 3,
) -> TimeSeries:
    """Measured angles -> [phi1, phi2, dphi1, dphi2] series.

    Smooths the raw angle channels first (when a window is given) and then
    differentiates the smoothed signal, mirroring how encoder data is
    prepared before energy evaluation.
    """
    if angles.state_dim != 2:
        raise DimensionError("expected 2 angle columns [phi1, phi2]")
    series = angles
    if smooth_window:
        series = smooth_savitzky_golay(series, smooth_window, smooth_poly_order)
    rates = differentiate(series, diff_method, diff_window, diff_poly_order)
    return TimeSeries(
        angles.t0, angles.dt, np.hstack([series.states, rates.values])
    )


def build_energy_library(include_velocity_trig_products: bool = False) -> CandidateLibrary:
    """Candidate terms over [phi1, phi2, dphi1, dphi2].

    Polynomials to degree 3 in the angular velocities merged with Fourier
    orders 1-3 in the angles.  ``include_velocity_trig_products`` adds
    velocity monomials (degree <= 2) multiplied by first-order trig factors
    of the angles, which lets the fit represent energy-like cross terms such
    as dphi1*dphi2*cos(phi1)*cos(phi2).
    """
    poly_terms = [
        TermSpec(exponents=(0, 0, e1, e2))
        for e1 in range(4)
        for e2 in range(4)
    ]
    poly_terms.sort(key=lambda t: lib_mod._monomial_sort_key(t.exponents))
    poly = CandidateLibrary(tuple(poly_terms), 4)
    fourier = build_fourier_library(4, 3, variables=(0, 1))
    lib = merge_libraries(poly, fourier)
    if include_velocity_trig_products:
        vel_monos = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        trig_sets = [
            (("sin", 0, 1),),
            (("cos", 0, 1),),
            (("sin", 1, 1),),
            (("cos", 1, 1),),
            (("sin", 0, 1), ("sin", 1, 1)),
            (("sin", 0, 1), ("cos", 1, 1)),
            (("cos", 0, 1), ("sin", 1, 1)),
            (("cos", 0, 1), ("cos", 1, 1)),
        ]
        mixed = [
            TermSpec(exponents=(0, 0, e1, e2), trig=trig)
            for (e1, e2) in vel_monos
            for trig in trig_sets
        ]
        lib = merge_libraries(lib, CandidateLibrary(tuple(mixed), 4))
    return lib


@dataclass(frozen=True)
class EnergyFitResult:
    """Fitted dissipation model plus its training-error series."""

    model: DiscrepancyModel
    deltaH_fit: np.ndarray
    error_pct: np.ndarray


def energy_error_pct(deltaH: np.ndarray, deltaH_fit: np.ndarray) -> np.ndarray:
    """Pointwise error as a percentage of the peak dissipated energy."""
    deltaH = np.asarray(deltaH, dtype=float)
    scale = np.max(np.abs(deltaH))
    if scale == 0.0:
        raise DataError("deltaH is identically zero; error percentage undefined")
    return (deltaH - np.asarray(deltaH_fit, dtype=float)) / scale * 100.0


def predict_dissipated_energy(model: DiscrepancyModel, states: TimeSeries) -> np.ndarray:
    """Model-predicted dissipated energy along a trajectory.

    The prediction is re-referenced to the trajectory's first sample (the
    measured deltaH is referenced to its own initial energy, so a model
    trained on one trajectory carries the training reference in its constant
    term; subtracting the value at t0 removes it).
    """
    raw = model.predict(states.states)[:, 0]
    return raw - raw[0]


def fit_energy_discrepancy(
    es: EnergySeries,
    states: TimeSeries,
    lib: CandidateLibrary,
    solver: SolverConfig = SolverConfig(threshold=1e-5),
) -> EnergyFitResult:
    """Fit deltaH as an instantaneous function of the measured state."""
    if states.state_dim != lib.state_dim:
        raise DimensionError(
            f"library expects {lib.state_dim} state columns, series has {states.state_dim}"
        )
    if states.n_samples != es.deltaH.shape[0]:
        raise DimensionError("energy series and state series lengths differ")
    theta = lib_mod.evaluate(lib, states.states)
    coeffs = stlsq(
        theta,
        es.deltaH[:, None],
        solver.threshold,
        solver.max_iters,
        solver.normalize,
        term_names=tuple(lib.names),
    )
    fit = theta @ coeffs.xi[:, 0]
    rmse = float(np.sqrt(np.mean((fit - es.deltaH) ** 2)))
    condition = float(np.linalg.cond(theta / coeffs.column_scales))
    model = DiscrepancyModel(lib, coeffs, FitDiagnostics((rmse,), condition))
    return EnergyFitResult(model, fit, energy_error_pct(es.deltaH, fit))
