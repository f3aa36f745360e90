"""Reference dynamical systems.

Van der Pol oscillator (true and structurally deficient variants) and the
double pendulum on a cart driven by a prescribed cart acceleration, with and
without joint friction.  Angles are measured from the upright position, so
the center-of-mass heights are ``a*cos(phi)`` and the upright equilibrium is
the state of maximum potential energy.

The pendulum equations of motion are derived from the two-link Lagrangian
with the cart acceleration ``u = s_ddot`` entering as an exogenous input;
the cart's own kinetic energy drops out because its motion is prescribed.
Correctness is gated on energy conservation, the two equilibria, and
mirror-symmetry checks in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsModel
from .errors import ParameterError

# --------------------------------------------------------------------------
# Van der Pol oscillator


@dataclass(frozen=True)
class VanDerPolParams:
    alpha: float

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ParameterError("alpha must be finite")


def vdp_rhs(x: np.ndarray, alpha: float) -> np.ndarray:
    """d/dt [x1, x2] = [x2, alpha*(1 - x1^2)*x2 - x1]."""
    x1, x2 = float(x[0]), float(x[1])
    return np.array([x2, alpha * (1.0 - x1 * x1) * x2 - x1])


def vdp_inadequate_rhs(x: np.ndarray, alpha: float) -> np.ndarray:
    """Van der Pol with the restoring term dropped from the second equation."""
    x1, x2 = float(x[0]), float(x[1])
    return np.array([x2, alpha * (1.0 - x1 * x1) * x2])


def vdp_model(alpha: float) -> DynamicsModel:
    return DynamicsModel(lambda x, u: vdp_rhs(x, alpha), 2, name=f"vdp(alpha={alpha})")


def vdp_inadequate_model(alpha: float) -> DynamicsModel:
    return DynamicsModel(
        lambda x, u: vdp_inadequate_rhs(x, alpha), 2,
        name=f"vdp-inadequate(alpha={alpha})",
    )


# --------------------------------------------------------------------------
# Double pendulum on a cart


@dataclass(frozen=True)
class PendulumParams:
    """Two-link pendulum parameters.

    Masses (kg), center-of-mass distances and arm lengths (m), inertias
    (kg m^2), viscous damping coefficients (N m s/rad, assumed; the source
    data sheet gives no units), gravity (m/s^2).
    """

    m1: float
    m2: float
    a1: float
    a2: float
    I1: float
    I2: float
    l1: float
    l2: float
    k1: float = 0.0
    k2: float = 0.0
    g: float = 9.81

    def __post_init__(self):
        for name in ("m1", "m2", "a1", "a2", "I1", "I2", "l1", "l2", "g"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be strictly positive")
        if self.k1 < 0 or self.k2 < 0:
            raise ParameterError("damping coefficients must be non-negative")
        if self.a1 > self.l1 or self.a2 > self.l2:
            raise ParameterError("centers of mass cannot lie beyond the arm tips")

    # Lumped constants of the equations of motion.
    @property
    def j1(self) -> float:
        return self.m1 * self.a1**2 + self.m2 * self.l1**2 + self.I1

    @property
    def j2(self) -> float:
        return self.m2 * self.a2**2 + self.I2

    @property
    def j12(self) -> float:
        return self.m2 * self.l1 * self.a2

    @property
    def mu1(self) -> float:
        return self.m1 * self.a1 + self.m2 * self.l1

    @property
    def mu2(self) -> float:
        return self.m2 * self.a2


#: Identified parameters of the physical test rig this package models.
REFERENCE_PARAMS = PendulumParams(
    m1=0.2704, m2=0.2056,
    a1=0.1910, a2=0.1621,
    I1=0.003, I2=0.0011,
    l1=0.2667, l2=0.2667,
    k1=7.24e-4, k2=1.65e-4,
    g=9.818,
)

PARAM_PRESETS = {"reference": REFERENCE_PARAMS}


@dataclass(frozen=True)
class PendulumState:
    """Full cart-pendulum state [phi1, phi2, s, dphi1, dphi2, ds]."""

    phi1: float
    phi2: float
    s: float = 0.0
    dphi1: float = 0.0
    dphi2: float = 0.0
    ds: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2, self.s, self.dphi1, self.dphi2, self.ds])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "PendulumState":
        return cls(*(float(v) for v in np.asarray(x).ravel()))


def _angular_accelerations(phi1, phi2, w1, w2, u, p: PendulumParams, friction: bool):
    """Solve the 2x2 link equations for (phi1_ddot, phi2_ddot), scalar path."""
    c = math.cos(phi1 - phi2)
    s = math.sin(phi1 - phi2)
    q1 = q2 = 0.0
    if friction:
        rel = p.k2 * (w1 - w2)
        q1 = -p.k1 * w1 - rel
        q2 = rel
    b1 = p.mu1 * (p.g * math.sin(phi1) - u * math.cos(phi1)) - p.j12 * s * w2 * w2 + q1
    b2 = p.mu2 * (p.g * math.sin(phi2) - u * math.cos(phi2)) + p.j12 * s * w1 * w1 + q2
    m12 = p.j12 * c
    det = p.j1 * p.j2 - m12 * m12
    return (p.j2 * b1 - m12 * b2) / det, (p.j1 * b2 - m12 * b1) / det


def pendulum_rhs(x: np.ndarray, u: float, p: PendulumParams, friction: bool = False) -> np.ndarray:
    """Cart-pendulum vector field for x = [phi1, phi2, s, dphi1, dphi2, ds].

    The cart acceleration ``u`` is the control; joint friction enters as the
    generalized torques Q1 = -k1*dphi1 - k2*(dphi1 - dphi2), Q2 = +k2*(dphi1
    - dphi2), so the locked-cart energy decays at exactly the rate
    k1*dphi1^2 + k2*(dphi1 - dphi2)^2.
    """
    phi1, phi2, w1, w2, v = float(x[0]), float(x[1]), float(x[3]), float(x[4]), float(x[5])
    uu = float(u)
    a1, a2 = _angular_accelerations(phi1, phi2, w1, w2, uu, p, friction)
    return np.array([w1, w2, v, a1, a2, uu])


def pendulum_flawed_rhs(x: np.ndarray, u: float, p: PendulumParams) -> np.ndarray:
    """Deliberately imperfect cart-pendulum model.

    Frictionless dynamics plus a spurious sin(phi1) on the first component
    and an input gain of 0.95 instead of 1 on the cart acceleration, so the
    truth-minus-model residual is [-sin(phi1), 0, 0, 0, 0, 0.05*u].
    """
    out = pendulum_rhs(x, u, p, friction=False)
    out[0] += math.sin(float(x[0]))
    out[5] = 0.95 * float(u)
    return out


def pendulum_locked_rhs(x: np.ndarray, p: PendulumParams, friction: bool = True) -> np.ndarray:
    """Locked-cart pendulum, x = [phi1, phi2, dphi1, dphi2]."""
    phi1, phi2, w1, w2 = float(x[0]), float(x[1]), float(x[2]), float(x[3])
    a1, a2 = _angular_accelerations(phi1, phi2, w1, w2, 0.0, p, friction)
    return np.array([w1, w2, a1, a2])


def _accel_jacobian(phi1, phi2, w1, w2, u, p: PendulumParams, friction: bool):
    """Batched partials of the angular accelerations.

    Inputs are (K,) arrays; returns d(a)/d(phi1, phi2, w1, w2, u) as five
    (K, 2) arrays.  Used by the trajectory optimizer's adjoint pass.
    """
    c = np.cos(phi1 - phi2)
    s = np.sin(phi1 - phi2)
    j1, j2, j12, mu1, mu2, g = p.j1, p.j2, p.j12, p.mu1, p.mu2, p.g
    k1 = p.k1 if friction else 0.0
    k2 = p.k2 if friction else 0.0

    m12 = j12 * c
    det = j1 * j2 - m12 * m12

    q1 = -k1 * w1 - k2 * (w1 - w2)
    q2 = k2 * (w1 - w2)
    b1 = mu1 * (g * np.sin(phi1) - u * np.cos(phi1)) - j12 * s * w2**2 + q1
    b2 = mu2 * (g * np.sin(phi2) - u * np.cos(phi2)) + j12 * s * w1**2 + q2
    acc1 = (j2 * b1 - m12 * b2) / det
    acc2 = (j1 * b2 - m12 * b1) / det

    def solve(r1, r2):
        return np.stack([(j2 * r1 - m12 * r2) / det, (j1 * r2 - m12 * r1) / det], axis=-1)

    # d(M)/dphi1 = [[0, -j12*s], [-j12*s, 0]] = -d(M)/dphi2
    dm_a1 = -j12 * s * acc2
    dm_a2 = -j12 * s * acc1
    db1_p1 = mu1 * (g * np.cos(phi1) + u * np.sin(phi1)) - j12 * c * w2**2
    db2_p1 = j12 * c * w1**2
    da_p1 = solve(db1_p1 - dm_a1, db2_p1 - dm_a2)

    db1_p2 = j12 * c * w2**2
    db2_p2 = mu2 * (g * np.cos(phi2) + u * np.sin(phi2)) - j12 * c * w1**2
    da_p2 = solve(db1_p2 + dm_a1, db2_p2 + dm_a2)

    ones = np.ones_like(phi1)
    da_w1 = solve((-k1 - k2) * ones, 2.0 * j12 * s * w1 + k2)
    da_w2 = solve(-2.0 * j12 * s * w2 + k2, -k2 * ones)
    da_u = solve(-mu1 * np.cos(phi1), -mu2 * np.cos(phi2))
    return da_p1, da_p2, da_w1, da_w2, da_u


def _cart_jacobian(X, U, p: PendulumParams, friction: bool, flawed: bool):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    u = np.asarray(U, dtype=float).reshape(X.shape[0])
    phi1, phi2, w1, w2 = X[:, 0], X[:, 1], X[:, 3], X[:, 4]
    da_p1, da_p2, da_w1, da_w2, da_u = _accel_jacobian(phi1, phi2, w1, w2, u, p, friction)
    K = X.shape[0]
    A = np.zeros((K, 6, 6))
    A[:, 0, 3] = 1.0
    A[:, 1, 4] = 1.0
    A[:, 2, 5] = 1.0
    A[:, 3, 0] = da_p1[:, 0]
    A[:, 4, 0] = da_p1[:, 1]
    A[:, 3, 1] = da_p2[:, 0]
    A[:, 4, 1] = da_p2[:, 1]
    A[:, 3, 3] = da_w1[:, 0]
    A[:, 4, 3] = da_w1[:, 1]
    A[:, 3, 4] = da_w2[:, 0]
    A[:, 4, 4] = da_w2[:, 1]
    B = np.zeros((K, 6, 1))
    B[:, 3, 0] = da_u[:, 0]
    B[:, 4, 0] = da_u[:, 1]
    B[:, 5, 0] = 0.95 if flawed else 1.0
    if flawed:
        A[:, 0, 0] += np.cos(phi1)
    return A, B


def pendulum_cart_model(p: PendulumParams, friction: bool = False) -> DynamicsModel:
    """True cart-pendulum dynamics as a DynamicsModel (6 states, 1 input)."""
    return DynamicsModel(
        f=lambda x, u: pendulum_rhs(x, float(np.asarray(u).ravel()[0]), p, friction),
        state_dim=6,
        control_dim=1,
        name="pendulum-cart" + ("-friction" if friction else ""),
        jacobian=lambda X, U: _cart_jacobian(X, U, p, friction, flawed=False),
    )


def pendulum_cart_flawed_model(p: PendulumParams) -> DynamicsModel:
    """The imperfect cart-pendulum model used for controller design."""
    return DynamicsModel(
        f=lambda x, u: pendulum_flawed_rhs(x, float(np.asarray(u).ravel()[0]), p),
        state_dim=6,
        control_dim=1,
        name="pendulum-cart-flawed",
        jacobian=lambda X, U: _cart_jacobian(X, U, p, friction=False, flawed=True),
    )


def pendulum_locked_model(p: PendulumParams, friction: bool = True) -> DynamicsModel:
    """Locked-cart pendulum (4 states, no input), for free-swing experiments."""
    return DynamicsModel(
        f=lambda x, u: pendulum_locked_rhs(x, p, friction),
        state_dim=4,
        control_dim=0,
        name="pendulum-locked" + ("-friction" if friction else ""),
    )


# --------------------------------------------------------------------------
# Energy functions (locked cart)


def energy_components(phi1, phi2, dphi1, dphi2, p: PendulumParams):
    """Kinetic and potential energy, broadcast over array inputs.

    T = 0.5*J1*dphi1^2 + 0.5*J2*dphi2^2 + J12*cos(phi1 - phi2)*dphi1*dphi2,
    V = g*(mu1*cos(phi1) + mu2*cos(phi2)); equivalent to summing the
    translational and rotational energies of both links with the cart held
    fixed.
    """
    phi1, phi2 = np.asarray(phi1, dtype=float), np.asarray(phi2, dtype=float)
    dphi1, dphi2 = np.asarray(dphi1, dtype=float), np.asarray(dphi2, dtype=float)
    T = (
        0.5 * p.j1 * dphi1**2
        + 0.5 * p.j2 * dphi2**2
        + p.j12 * np.cos(phi1 - phi2) * dphi1 * dphi2
    )
    V = p.g * (p.mu1 * np.cos(phi1) + p.mu2 * np.cos(phi2))
    return T, V


def kinetic_potential(x, p: PendulumParams) -> tuple[float, float]:
    """(T, V) of a single pendulum state.

    Accepts a PendulumState, a 4-vector [phi1, phi2, dphi1, dphi2], or a
    6-vector [phi1, phi2, s, dphi1, dphi2, ds]; the cart contributes nothing
    because its position is locked or prescribed.
    """
    if isinstance(x, PendulumState):
        phi1, phi2, w1, w2 = x.phi1, x.phi2, x.dphi1, x.dphi2
    else:
        arr = np.asarray(x, dtype=float).ravel()
        if arr.shape[0] == 4:
            phi1, phi2, w1, w2 = arr
        elif arr.shape[0] == 6:
            phi1, phi2, w1, w2 = arr[0], arr[1], arr[3], arr[4]
        else:
            raise ParameterError("expected a 4- or 6-dimensional pendulum state")
    T, V = energy_components(phi1, phi2, w1, w2, p)
    return float(T), float(V)


def dissipation_power(dphi1, dphi2, p: PendulumParams):
    """Instantaneous frictional power k1*dphi1^2 + k2*(dphi1 - dphi2)^2."""
    dphi1 = np.asarray(dphi1, dtype=float)
    dphi2 = np.asarray(dphi2, dtype=float)
    return p.k1 * dphi1**2 + p.k2 * (dphi1 - dphi2) ** 2
