"""discrepid: sparse discrepancy-model identification for dynamical systems.

Learn interpretable corrections to imperfect physical models from trajectory
data: build candidate-function libraries, regress the model error with
sequentially thresholded least squares, and use the corrected hybrid model
for simulation, energy-dissipation identification, and feed-forward swing-up
control of a double pendulum on a cart.
"""

from .dynamics import DynamicsModel
from .energy import (
    EnergySeries,
    build_energy_library,
    compute_energy_series,
    dissipated_energy_quadrature,
    fit_energy_discrepancy,
)
from .library import (
    CandidateLibrary,
    TermSpec,
    build_fourier_library,
    build_polynomial_library,
    evaluate,
    merge_libraries,
    with_control_products,
)
from .numerics import (
    DerivativeEstimate,
    TimeSeries,
    differentiate,
    integrate_rk4,
    smooth_savitzky_golay,
    solve_least_squares,
)
from .sindy import (
    DerivativeConfig,
    DiscrepancyModel,
    HybridModel,
    SolverConfig,
    SparseCoefficients,
    assemble_discrepancy_targets,
    evaluate_hybrid,
    fit_discrepancy,
    hybrid_dynamics,
    stlsq,
)
from .systems import (
    PendulumParams,
    PendulumState,
    REFERENCE_PARAMS,
    VanDerPolParams,
    kinetic_potential,
    pendulum_cart_flawed_model,
    pendulum_cart_model,
    pendulum_flawed_rhs,
    pendulum_locked_model,
    pendulum_rhs,
    vdp_inadequate_rhs,
    vdp_model,
    vdp_rhs,
)
from .control import (
    ControlTrajectory,
    OptimizerConfig,
    SwingUpProblem,
    closed_loop_discrepancy_experiment,
    optimize_swing_up,
    playback,
)

__version__ = "0.1.0"
