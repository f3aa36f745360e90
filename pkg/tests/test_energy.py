import numpy as np
import pytest

from discrepid.energy import (
    EnergyFitResult,
    EnergySeries,
    angles_to_state_series,
    build_energy_library,
    compute_energy_series,
    dissipated_energy_quadrature,
    energy_error_pct,
    fit_energy_discrepancy,
    predict_dissipated_energy,
)
from discrepid.errors import DimensionError, ParameterError
from discrepid.numerics import TimeSeries, integrate_rk4
from discrepid.sindy import SolverConfig
from discrepid.systems import REFERENCE_PARAMS as P, pendulum_locked_model

X0 = np.array([np.pi / 4, np.pi / 2, 0.0, 0.0])


@pytest.fixture(scope="module")
def frictional_run():
    model = pendulum_locked_model(P, friction=True)
    return integrate_rk4(model, X0, t_span=8.0, dt=1e-3)


@pytest.fixture(scope="module")
def frictionless_run():
    model = pendulum_locked_model(P, friction=False)
    return integrate_rk4(model, X0, t_span=8.0, dt=1e-3)


class TestEnergySeries:
    def test_invariants_enforced(self):
        t = np.arange(3.0)
        H = np.array([1.0, 0.9, 0.8])
        with pytest.raises(ParameterError):
            EnergySeries(t, H, 1.0, np.array([0.0, 0.0, 0.2]))
        with pytest.raises(ParameterError):
            EnergySeries(t, H, 1.1, 1.1 - H)  # deltaH[0] != 0
        es = EnergySeries(t, H, 1.0, 1.0 - H)
        assert es.deltaH[0] == 0.0

    def test_gauge_shift_leaves_deltaH_unchanged(self, frictional_run):
        es = compute_energy_series(frictional_run, P)
        shifted = EnergySeries(es.t, es.H_m + 2.5, es.E0 + 2.5, (es.E0 + 2.5) - (es.H_m + 2.5))
        assert np.allclose(shifted.deltaH, es.deltaH, atol=1e-12)

    def test_requires_four_columns(self):
        with pytest.raises(DimensionError):
            compute_energy_series(TimeSeries(0.0, 0.1, np.zeros((5, 2))), P)


class TestDissipation:
    def test_frictionless_deltaH_is_flat(self, frictionless_run):
        es = compute_energy_series(frictionless_run, P)
        assert np.max(np.abs(es.deltaH)) <= 1e-6 * abs(es.E0)

    def test_deltaH_monotone_with_friction(self, frictional_run):
        es = compute_energy_series(frictional_run, P)
        assert es.deltaH[0] == 0.0
        assert np.min(np.diff(es.deltaH)) >= -1e-10
        assert es.deltaH[-1] > 0.1

    def test_two_routes_agree(self, frictional_run):
        # energy difference vs quadrature of the frictional power
        es = compute_energy_series(frictional_run, P)
        quad = dissipated_energy_quadrature(frictional_run, P)
        scale = np.max(np.abs(es.deltaH))
        assert np.max(np.abs(es.deltaH - quad)) <= 0.01 * scale


class TestLibrary:
    def test_pure_library_content(self):
        lib = build_energy_library()
        assert lib.size == 28  # 16 velocity monomials + 12 Fourier terms
        assert "1" in lib.names
        assert "x3^2" in lib.names and "x3*x4" in lib.names
        assert "sin(3*x1)" in lib.names and "cos(x2)" in lib.names
        assert all("*cos" not in n or n.startswith(("sin", "cos")) for n in lib.names)

    def test_mixed_library_spans_the_energy(self):
        lib = build_energy_library(include_velocity_trig_products=True)
        assert lib.size == 68
        for needed in ("x3^2", "x4^2", "cos(x1)", "cos(x2)",
                       "x3*x4*cos(x1)*cos(x2)", "x3*x4*sin(x1)*sin(x2)"):
            assert needed in lib.names, needed


class TestFit:
    def test_clean_frictional_fit_is_tight(self, frictional_run):
        es = compute_energy_series(frictional_run, P)
        lib = build_energy_library(include_velocity_trig_products=True)
        res = fit_energy_discrepancy(es, frictional_run, lib, SolverConfig(threshold=1e-5))
        assert isinstance(res, EnergyFitResult)
        assert np.max(np.abs(res.error_pct)) <= 1.0

    def test_frictionless_fit_prunes_everything(self, frictionless_run):
        es = compute_energy_series(frictionless_run, P)
        lib = build_energy_library(include_velocity_trig_products=True)
        res = fit_energy_discrepancy(es, frictionless_run, lib, SolverConfig(threshold=1e-5))
        assert not res.model.coefficients.active.any()

    def test_validation_with_different_initial_energy(self, frictional_run):
        es = compute_energy_series(frictional_run, P)
        lib = build_energy_library(include_velocity_trig_products=True)
        res = fit_energy_discrepancy(es, frictional_run, lib, SolverConfig(threshold=1e-5))
        model_dyn = pendulum_locked_model(P, friction=True)
        held_out = integrate_rk4(model_dyn, np.array([1.2, -0.9, 0.0, 0.0]), t_span=8.0, dt=1e-3)
        es_v = compute_energy_series(held_out, P)
        pred = predict_dissipated_energy(res.model, held_out)
        err = energy_error_pct(es_v.deltaH, pred)
        assert abs(es_v.E0 - es.E0) > 0.05  # genuinely different reference energy
        assert np.max(np.abs(err)) <= 5.0

    def test_shape_checks(self, frictional_run):
        es = compute_energy_series(frictional_run, P)
        lib = build_energy_library()
        with pytest.raises(DimensionError):
            fit_energy_discrepancy(es, TimeSeries(0.0, 1e-3, frictional_run.states[:, :2]), lib)


class TestNoisyPipeline:
    def test_angles_to_state_series(self, frictional_run):
        rng = np.random.default_rng(3)
        sigma = 2 * np.pi / 5000
        angles = TimeSeries(
            0.0, 1e-3, frictional_run.states[:, :2] + rng.normal(0, sigma, (frictional_run.n_samples, 2))
        )
        states = angles_to_state_series(angles, smooth_window=51, smooth_poly_order=3)
        assert states.state_dim == 4
        # reconstructed angular velocities track the simulated ones
        err = np.abs(states.states[100:-100, 2:] - frictional_run.states[100:-100, 2:])
        assert np.max(err) < 1.0  # smoothing clips the sharpest velocity peaks
        assert np.mean(err) < 0.1

    def test_requires_two_angle_columns(self, frictional_run):
        with pytest.raises(DimensionError):
            angles_to_state_series(frictional_run)
