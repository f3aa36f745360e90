"""Experiment configuration: JSON schema, validation, and shipped presets.

A config fully determines a run; identical config plus identical seed gives
byte-identical outputs.  Measurement noise uses NumPy's seeded default
generator (PCG64), so synthetic datasets are reproducible bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import library as lib_mod
from .control import OptimizerConfig, SwingUpProblem
from .dynamics import DynamicsModel
from .energy import build_energy_library
from .errors import ConfigError
from .library import CandidateLibrary
from .sindy import DerivativeConfig, SolverConfig
from .systems import (
    PARAM_PRESETS,
    PendulumParams,
    pendulum_cart_flawed_model,
    pendulum_cart_model,
    pendulum_locked_model,
    vdp_inadequate_model,
    vdp_model,
)

EXPERIMENTS = ("vdp-param", "vdp-structure", "pendulum-energy", "pendulum-swingup")

PRESET_NAMES = EXPERIMENTS


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing")
    return d[key]


def _number(d: dict, key: str, where: str, *, positive=False, non_negative=False, default=None):
    if key not in d:
        if default is not None:
            return default
        raise ConfigError(f"{where}.{key}", "missing")
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key}", f"expected a number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key}", f"must be positive, got {v}")
    if non_negative and v < 0:
        raise ConfigError(f"{where}.{key}", f"must be non-negative, got {v}")
    return float(v)


def _vector(d: dict, key: str, where: str, length: int | None = None):
    v = _require(d, key, where)
    if not isinstance(v, (list, tuple)) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        raise ConfigError(f"{where}.{key}", "expected a list of numbers")
    if length is not None and len(v) != length:
        raise ConfigError(f"{where}.{key}", f"expected length {length}, got {len(v)}")
    return np.asarray(v, dtype=float)


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    sigma: float = 0.0


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float
    t_span: float
    x0: np.ndarray


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed, validated experiment description."""

    experiment: str
    system: dict
    noise: NoiseConfig
    integration: IntegrationConfig
    solver: SolverConfig
    derivative: DerivativeConfig
    library_spec: dict | None
    validation: IntegrationConfig | None
    swingup: dict | None
    output_dir: str

    @property
    def state_dim(self) -> int:
        if self.experiment.startswith("vdp"):
            return 2
        if self.experiment == "pendulum-energy":
            return 4
        return 6


def load_raw_config(path_or_preset: str) -> dict:
    """Read a config from a file path or, failing that, a shipped preset name."""
    p = Path(path_or_preset)
    if p.exists():
        with open(p) as fh:
            try:
                return json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<file>", f"{path_or_preset} is not valid JSON: {exc}") from exc
    if path_or_preset in PRESET_NAMES:
        return load_preset(path_or_preset)
    raise ConfigError("<config>", f"no such file or preset: {path_or_preset!r}")


def load_preset(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise ConfigError("<preset>", f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    text = resources.files("discrepid").joinpath(f"presets/{name}.json").read_text()
    return json.loads(text)


def parse_config(raw: dict) -> ExperimentConfig:
    experiment = _require(raw, "experiment", "")
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {experiment!r}")

    system = raw.get("system", {})
    if not isinstance(system, dict):
        raise ConfigError("system", "expected an object")

    noise_raw = raw.get("noise", {})
    noise = NoiseConfig(
        seed=int(noise_raw.get("seed", 0)),
        sigma=_number(noise_raw, "sigma", "noise", non_negative=True, default=0.0),
    )

    integ_raw = _require(raw, "integration", "")
    n_states = {"vdp-param": 2, "vdp-structure": 2, "pendulum-energy": 4, "pendulum-swingup": 6}[experiment]
    integration = IntegrationConfig(
        dt=_number(integ_raw, "dt", "integration", positive=True),
        t_span=_number(integ_raw, "t_span", "integration", positive=True),
        x0=_vector(integ_raw, "x0", "integration", n_states),
    )
    if integration.t_span < integration.dt:
        raise ConfigError("integration.t_span", "must be at least one time step")

    solver_raw = raw.get("solver", {})
    solver = SolverConfig(
        threshold=_number(solver_raw, "threshold", "solver", non_negative=True, default=0.05),
        max_iters=int(solver_raw.get("max_iters", 20)),
        normalize=bool(solver_raw.get("normalize", True)),
        min_rows_per_term=int(solver_raw.get("min_rows_per_term", 10)),
        residual_ceiling=solver_raw.get("residual_ceiling"),
    )
    if solver.max_iters < 1:
        raise ConfigError("solver.max_iters", "must be at least 1")

    deriv_raw = raw.get("derivative", {})
    smooth_window = deriv_raw.get("smooth_window")
    derivative = DerivativeConfig(
        method=deriv_raw.get("method", "central"),
        window=int(deriv_raw.get("window", 51)),
        poly_order=int(deriv_raw.get("poly_order", 3)),
        smooth_window=None if smooth_window in (None, 0) else int(smooth_window),
        smooth_poly_order=int(deriv_raw.get("smooth_poly_order", 3)),
    )
    if derivative.method not in ("central", "savitzky-golay"):
        raise ConfigError("derivative.method", f"unknown method {derivative.method!r}")

    validation = None
    if "validation" in raw:
        val_raw = raw["validation"]
        validation = IntegrationConfig(
            dt=_number(val_raw, "dt", "validation", positive=True, default=integration.dt),
            t_span=_number(val_raw, "t_span", "validation", positive=True, default=integration.t_span),
            x0=_vector(val_raw, "x0", "validation", n_states),
        )

    swingup = raw.get("swingup")
    if experiment == "pendulum-swingup" and swingup is None:
        raise ConfigError("swingup", "missing (required for pendulum-swingup)")

    io_raw = raw.get("io", {})
    output_dir = io_raw.get("output_dir", "out")

    return ExperimentConfig(
        experiment=experiment,
        system=system,
        noise=noise,
        integration=integration,
        solver=solver,
        derivative=derivative,
        library_spec=raw.get("library"),
        validation=validation,
        swingup=swingup,
        output_dir=output_dir,
    )


# --------------------------------------------------------------------------
# Builders


def pendulum_params(cfg: ExperimentConfig) -> PendulumParams:
    spec = cfg.system.get("params", "reference")
    if isinstance(spec, str):
        if spec not in PARAM_PRESETS:
            raise ConfigError("system.params", f"unknown parameter preset {spec!r}")
        return PARAM_PRESETS[spec]
    if isinstance(spec, dict):
        try:
            return PendulumParams(**spec)
        except (TypeError, ValueError) as exc:
            raise ConfigError("system.params", str(exc)) from exc
    raise ConfigError("system.params", "expected a preset name or parameter object")


def truth_model(cfg: ExperimentConfig) -> DynamicsModel:
    """The simulated plant the experiment treats as ground truth."""
    if cfg.experiment.startswith("vdp"):
        return vdp_model(_number(cfg.system, "alpha", "system", default=0.5))
    p = pendulum_params(cfg)
    if cfg.experiment == "pendulum-energy":
        return pendulum_locked_model(p, friction=bool(cfg.system.get("friction", True)))
    return pendulum_cart_model(p, friction=False)


def nominal_model(cfg: ExperimentConfig) -> DynamicsModel:
    """The imperfect model whose discrepancy is to be identified."""
    if cfg.experiment == "vdp-param":
        return vdp_model(_number(cfg.system, "alpha_nominal", "system", default=0.1))
    if cfg.experiment == "vdp-structure":
        return vdp_inadequate_model(_number(cfg.system, "alpha", "system", default=0.5))
    if cfg.experiment == "pendulum-swingup":
        p = pendulum_params(cfg)
        if bool(cfg.system.get("mismatch", True)):
            return pendulum_cart_flawed_model(p)
        return pendulum_cart_model(p, friction=False)
    raise ConfigError("experiment", f"{cfg.experiment} has no nominal dynamics model")


def build_library(spec: dict | None, default_state_dim: int) -> CandidateLibrary:
    """Assemble a candidate library from its JSON description.

    Either ``{"type": "energy", ...}`` or a block list merged in order:
    ``{"state_dim": n, "blocks": [{"type": "polynomial"|"fourier", ...}],
    "control_products": {"control_dim": r, "max_u_degree": d}}``.
    """
    if spec is None:
        raise ConfigError("library", "missing")
    if spec.get("type") == "energy":
        return build_energy_library(bool(spec.get("velocity_trig_products", False)))
    n = int(spec.get("state_dim", default_state_dim))
    blocks = spec.get("blocks")
    if blocks is not None:
        lib = None
        for i, block in enumerate(blocks):
            btype = block.get("type")
            if btype == "polynomial":
                mtd = block.get("max_total_degree")
                part = lib_mod.build_polynomial_library(
                    n,
                    int(block.get("max_degree", 2)),
                    bool(block.get("include_constant", True)),
                    None if mtd is None else int(mtd),
                )
            elif btype == "fourier":
                part = lib_mod.build_fourier_library(
                    n,
                    int(block.get("max_order", 1)),
                    block.get("variables"),
                )
            else:
                raise ConfigError(f"library.blocks[{i}].type", f"unknown block type {btype!r}")
            if "exclude" in block:
                part = lib_mod.without_terms(part, block["exclude"])
            lib = part if lib is None else lib_mod.merge_libraries(lib, part)
        if lib is None:
            raise ConfigError("library.blocks", "must not be empty")
    elif "terms" in spec:
        lib = lib_mod.library_from_dict(spec)
    else:
        raise ConfigError("library", "needs 'blocks', 'terms', or type 'energy'")
    cp = spec.get("control_products")
    if cp:
        lib = lib_mod.with_control_products(
            lib, int(cp.get("control_dim", 1)), int(cp.get("max_u_degree", 1))
        )
    return lib


def swing_up_problem(cfg: ExperimentConfig, model: DynamicsModel) -> SwingUpProblem:
    s = cfg.swingup or {}
    return SwingUpProblem(
        model=model,
        horizon=cfg.integration.t_span,
        dt=cfg.integration.dt,
        control_dt=_number(s, "control_dt", "swingup", positive=True, default=0.01),
        x0=cfg.integration.x0,
        x_target=np.asarray(s.get("target", [0.0] * 6), dtype=float),
        state_weights=np.asarray(s.get("state_weights", [10.0, 10.0, 20.0, 1.0, 1.0, 0.1]), dtype=float),
        input_weight=_number(s, "input_weight", "swingup", positive=True, default=1.0),
        u_max=_number(s, "u_max", "swingup", positive=True, default=30.0),
        terminal_weight=_number(s, "terminal_weight", "swingup", positive=True, default=1000.0),
    )


def optimizer_config(cfg: ExperimentConfig) -> OptimizerConfig:
    o = (cfg.swingup or {}).get("optimizer", {})
    defaults = OptimizerConfig()
    return OptimizerConfig(
        restarts=int(o.get("restarts", defaults.restarts)),
        seed=int(o.get("seed", defaults.seed)),
        max_iters=int(o.get("max_iters", defaults.max_iters)),
        chunk_iters=int(o.get("chunk_iters", defaults.chunk_iters)),
        success_error=float(o.get("success_error", defaults.success_error)),
        stop_on_success=bool(o.get("stop_on_success", defaults.stop_on_success)),
        pump_amplitude=tuple(o.get("pump_amplitude", defaults.pump_amplitude)),
        pump_frequency=tuple(o.get("pump_frequency", defaults.pump_frequency)),
    )
