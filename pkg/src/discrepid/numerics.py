"""Deterministic numerical kernels.

Fixed-step RK4 integration, numerical differentiation, Savitzky-Golay
smoothing and a dense least-squares solver.  Everything here is a pure
function of its inputs; results are bitwise reproducible for identical
arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.signal

from .dynamics import DynamicsModel
from .errors import (
    DataError,
    DimensionError,
    InsufficientDataError,
    IntegrationDivergedError,
    ParameterError,
)

ControlSignal = Union[None, np.ndarray, Callable[[float], np.ndarray]]

DIFF_CENTRAL = "central"
DIFF_SAVGOL = "savitzky-golay"


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled state (and optional control) trajectory.

    ``states`` is (m, n); ``controls``, when present, is (m, r) and holds the
    zero-order-hold value active at each sample time.
    """

    t0: float
    dt: float
    states: np.ndarray
    controls: np.ndarray | None = None

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        object.__setattr__(self, "states", states)
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if states.shape[0] < 2:
            raise ParameterError("a time series needs at least 2 samples")
        if not np.all(np.isfinite(states)):
            raise DataError("time series contains non-finite states")
        if self.controls is not None:
            controls = np.asarray(self.controls, dtype=float)
            if controls.ndim == 1:
                controls = controls[:, None]
            if controls.shape[0] != states.shape[0]:
                raise DimensionError(
                    f"controls have {controls.shape[0]} rows, "
                    f"states have {states.shape[0]}"
                )
            if not np.all(np.isfinite(controls)):
                raise DataError("time series contains non-finite controls")
            object.__setattr__(self, "controls", controls)

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def control_dim(self) -> int:
        return 0 if self.controls is None else self.controls.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def with_states(self, states: np.ndarray) -> "TimeSeries":
        return TimeSeries(self.t0, self.dt, states, self.controls)


@dataclass(frozen=True)
class DerivativeEstimate:
    """Estimated time derivative of a series' states, same shape (m, n)."""

    values: np.ndarray
    method: str
    boundary: str

    def __post_init__(self):
        object.__setattr__(self, "values", np.atleast_2d(np.asarray(self.values, dtype=float)))


def _n_steps(t_span: float, dt: float) -> int:
    # Tolerant floor: 25/0.01 must give 2500 steps despite fp rounding.
    return int(math.floor(t_span / dt + 1e-9))


def _control_at(u: ControlSignal, step: int, t: float, r: int) -> np.ndarray:
    if callable(u):
        val = np.atleast_1d(np.asarray(u(t), dtype=float))
    else:
        arr = u
        idx = min(step, arr.shape[0] - 1)
        val = np.atleast_1d(np.asarray(arr[idx], dtype=float))
    if val.shape[0] != r:
        raise DimensionError(f"control sample has dim {val.shape[0]}, model expects {r}")
    return val


def integrate_rk4(
    model: DynamicsModel,
    x0: np.ndarray,
    u: ControlSignal = None,
    *,
    t_span: float,
    dt: float,
    t0: float = 0.0,
) -> TimeSeries:
    """Integrate ``model`` with the classical fixed-step RK4 scheme.

    Returns ``floor(t_span/dt) + 1`` samples starting at ``x0``.  A control
    signal may be given as an array of per-step values (``(n_steps,)`` or
    ``(n_steps, r)``) or a callable ``t -> u``; it is sampled once per step
    and held constant across the step (zero-order hold).  The returned
    series stores the control value active at each sample time, repeating
    the last step's value on the final row.

    Raises :class:`IntegrationDivergedError` (carrying the step index) if a
    non-finite state appears mid-integration.
    """
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if t_span < dt:
        raise ParameterError(f"t_span ({t_span}) must be at least dt ({dt})")
    x0 = np.asarray(x0, dtype=float).ravel()
    model.check_compatible(x0, None if model.control_dim == 0 else np.zeros(model.control_dim))
    if model.control_dim > 0 and u is None:
        raise DimensionError(f"model '{model.name}' requires a control signal")
    if model.control_dim == 0 and u is not None:
        raise DimensionError(f"model '{model.name}' takes no control signal")

    n_steps = _n_steps(t_span, dt)
    m = n_steps + 1
    n = x0.shape[0]
    r = model.control_dim
    states = np.empty((m, n))
    states[0] = x0
    controls = np.empty((m, r)) if r > 0 else None

    f = model.f
    x = x0
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n_steps):
        t = t0 + k * dt
        uk = _control_at(u, k, t, r) if r > 0 else None
        if controls is not None:
            controls[k] = uk
        k1 = f(x, uk)
        k2 = f(x + half * k1, uk)
        k3 = f(x + half * k2, uk)
        k4 = f(x + dt * k3, uk)
        x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationDivergedError(k)
        states[k + 1] = x
    if controls is not None:
        controls[m - 1] = controls[m - 2] if n_steps > 0 else 0.0
    return TimeSeries(t0, dt, states, controls)


def _check_savgol_args(window: int, poly_order: int, m: int, *, smoothing: bool) -> None:
    if window % 2 == 0:
        raise ParameterError(f"window must be odd, got {window}")
    if poly_order < 1:
        raise ParameterError(f"poly_order must be >= 1, got {poly_order}")
    if window <= poly_order:
        raise ParameterError(
            f"window ({window}) must exceed poly_order ({poly_order})"
        )
    if smoothing:
        if window > m:
            raise InsufficientDataError(
                f"window ({window}) exceeds sample count ({m})"
            )
    elif window >= m:
        raise InsufficientDataError(
            f"window ({window}) must be smaller than sample count ({m})"
        )


def differentiate(
    ts: TimeSeries,
    method: str = DIFF_CENTRAL,
    window: int = 51,
    poly_order: int = 3,
) -> DerivativeEstimate:
    """Estimate d(states)/dt on the series' uniform grid.

    ``central`` uses the second-order central stencil on interior points and
    one-sided second-order differences at both endpoints.  ``savitzky-golay``
    differentiates the local least-squares polynomial fit, evaluating the
    asymmetric edge windows' fits at the endpoints.
    """
    x = ts.states
    m = x.shape[0]
    dt = ts.dt
    if method == DIFF_CENTRAL:
        if m < 3:
            raise InsufficientDataError("central differences need at least 3 samples")
        d = np.empty_like(x)
        d[1:-1] = (x[2:] - x[:-2]) / (2.0 * dt)
        d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt)
        d[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * dt)
        return DerivativeEstimate(d, DIFF_CENTRAL, "one-sided-second-order")
    if method == DIFF_SAVGOL:
        _check_savgol_args(window, poly_order, m, smoothing=False)
        d = scipy.signal.savgol_filter(
            x, window, poly_order, deriv=1, delta=dt, axis=0, mode="interp"
        )
        return DerivativeEstimate(d, DIFF_SAVGOL, "endpoint-polynomial-fit")
    raise ParameterError(f"unknown differentiation method '{method}'")


def smooth_savitzky_golay(ts: TimeSeries, window: int, poly_order: int) -> TimeSeries:
    """Savitzky-Golay smoothing of the series' states (controls untouched).

    Each interior point takes the value of a local least-squares polynomial
    fit centered on it; endpoints evaluate the asymmetric edge-window fit.
    Polynomials of degree <= poly_order are reproduced exactly.
    """
    _check_savgol_args(window, poly_order, ts.n_samples, smoothing=True)
    smoothed = scipy.signal.savgol_filter(
        ts.states, window, poly_order, axis=0, mode="interp"
    )
    return ts.with_states(smoothed)


@dataclass(frozen=True)
class LeastSquaresSolution:
    """Columnwise minimizer of ||A Z - b||_2 with rank diagnostics."""

    solution: np.ndarray
    rank: int
    rank_deficient: bool


def solve_least_squares(A: np.ndarray, b: np.ndarray, rcond: float = 1e-8) -> LeastSquaresSolution:
    """Minimize ``||A Z - b||_2`` columnwise via orthogonal factorization.

    Uses an SVD-backed solver (never the normal equations).  Singular values
    below ``rcond`` times the largest are treated as zero, so nearly
    degenerate column directions cannot blow up into huge cancelling
    coefficients; rank-deficient systems yield the minimum-norm solution and
    set ``rank_deficient``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(A)):
        raise DataError("least-squares matrix contains non-finite entries")
    if not np.all(np.isfinite(b)):
        raise DataError("least-squares targets contain non-finite entries")
    if A.ndim != 2:
        raise DimensionError("A must be 2-D")
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    if b.shape[0] != A.shape[0]:
        raise DimensionError(
            f"A has {A.shape[0]} rows but b has {b.shape[0]}"
        )
    z, _, rank, _ = np.linalg.lstsq(A, b, rcond=rcond)
    if squeeze:
        z = z[:, 0]
    return LeastSquaresSolution(z, int(rank), int(rank) < A.shape[1])


def cumulative_trapezoid(values: np.ndarray, dt: float, initial: float = 0.0) -> np.ndarray:
    """Cumulative trapezoid quadrature on a uniform grid."""
    values = np.asarray(values, dtype=float)
    out = np.empty(values.shape[0])
    out[0] = initial
    np.cumsum(0.5 * dt * (values[1:] + values[:-1]), out=out[1:])
    out[1:] += initial
    return out
