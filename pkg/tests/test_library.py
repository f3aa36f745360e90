import json
import math

import numpy as np
import pytest

from discrepid.errors import DimensionError, LibraryConflictError, ParameterError
from discrepid.library import (
    CandidateLibrary,
    TermSpec,
    build_fourier_library,
    build_polynomial_library,
    evaluate,
    evaluate_jacobian,
    library_from_dict,
    library_to_dict,
    merge_libraries,
    with_control_products,
    without_terms,
)

REFERENCE_7 = ["1", "x1", "x2", "x1*x2", "x1^2*x2", "x1*x2^2", "x1^2*x2^2"]


def scalar_oracle(term: TermSpec, x, u=None):
    """Naive per-element term evaluation, independent of the vectorized path."""
    v = 1.0
    for i, e in enumerate(term.exponents):
        v *= x[i] ** e
    for func, var, freq in term.trig:
        v *= getattr(math, func)(freq * x[var])
    for i, e in enumerate(term.control_exponents):
        v *= u[i] ** e
    return v


class TestBuilders:
    def test_poly_1d(self):
        lib = build_polynomial_library(1, 2)
        assert lib.names == ["1", "x1", "x1^2"]

    def test_poly_2d_order_and_content(self):
        lib = build_polynomial_library(2, 2)
        assert lib.names == [
            "1", "x1", "x2", "x1*x2", "x1^2", "x2^2",
            "x1^2*x2", "x1*x2^2", "x1^2*x2^2",
        ]
        for name in REFERENCE_7:
            assert name in lib.names

    @pytest.mark.parametrize("degree", [1, 2, 3, 4])
    def test_poly_count(self, degree):
        lib = build_polynomial_library(2, degree)
        assert lib.size == (degree + 1) ** 2

    def test_reference_column_filter(self):
        lib = without_terms(build_polynomial_library(2, 2), ["x1^2", "x2^2"])
        assert lib.names == REFERENCE_7

    def test_fourier_1d(self):
        lib = build_fourier_library(1, 1)
        assert lib.names == ["sin(x1)", "cos(x1)"]

    def test_fourier_count(self):
        assert build_fourier_library(2, 3).size == 12

    def test_fourier_at_zero(self):
        lib = build_fourier_library(2, 3)
        row = evaluate(lib, np.zeros((1, 2)))[0]
        for name, val in zip(lib.names, row):
            assert val == (0.0 if name.startswith("sin") else 1.0)

    def test_fourier_variable_subset(self):
        lib = build_fourier_library(6, 1, variables=(0, 1))
        assert lib.names == ["sin(x1)", "cos(x1)", "sin(x2)", "cos(x2)"]

    def test_preconditions(self):
        with pytest.raises(ParameterError):
            build_polynomial_library(0, 2)
        with pytest.raises(ParameterError):
            build_polynomial_library(2, 0)
        with pytest.raises(ParameterError):
            build_fourier_library(2, 0)


class TestMerge:
    def test_merge_poly_fourier(self):
        lib = merge_libraries(build_polynomial_library(1, 1), build_fourier_library(1, 1))
        assert lib.names == ["1", "x1", "sin(x1)", "cos(x1)"]

    def test_merge_with_empty_is_identity(self):
        lib = build_polynomial_library(2, 2)
        merged = merge_libraries(lib, CandidateLibrary((), 2))
        assert merged.names == lib.names

    def test_merge_self_conflicts(self):
        lib = build_polynomial_library(1, 1)
        with pytest.raises(LibraryConflictError):
            merge_libraries(lib, lib)

    def test_merge_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            merge_libraries(build_polynomial_library(1, 1), build_polynomial_library(2, 1))

    def test_evaluate_merge_is_concatenation(self):
        rng = np.random.default_rng(5)
        a = build_polynomial_library(2, 2)
        b = build_fourier_library(2, 2)
        X = rng.normal(size=(50, 2))
        merged = evaluate(merge_libraries(a, b), X)
        assert np.array_equal(merged, np.hstack([evaluate(a, X), evaluate(b, X)]))


class TestControlProducts:
    def test_enumeration(self):
        lib = with_control_products(build_polynomial_library(1, 1), 1, 1)
        assert lib.names == ["1", "x1", "u1", "x1*u1"]

    def test_cross_term_value(self):
        lib = with_control_products(build_polynomial_library(1, 1), 1, 1)
        theta = evaluate(lib, np.array([[2.0]]), np.array([[3.0]]))
        assert theta[0, lib.names.index("x1*u1")] == 6.0

    def test_swing_up_library_has_required_columns(self):
        state = merge_libraries(
            build_polynomial_library(6, 1), build_fourier_library(6, 1, variables=(0, 1))
        )
        lib = with_control_products(state, 1, 1)
        assert "sin(x1)" in lib.names
        assert "u1" in lib.names


class TestEvaluate:
    def test_reference_row(self):
        lib = without_terms(build_polynomial_library(2, 2), ["x1^2", "x2^2"])
        row = evaluate(lib, np.array([[1.0, 2.0]]))[0]
        assert np.array_equal(row, [1.0, 1.0, 2.0, 2.0, 2.0, 4.0, 4.0])

    def test_zeros_row(self):
        lib = merge_libraries(build_polynomial_library(2, 2), build_fourier_library(2, 1))
        row = evaluate(lib, np.zeros((1, 2)))[0]
        expect = {"1": 1.0, "sin(x1)": 0.0, "cos(x1)": 1.0, "sin(x2)": 0.0, "cos(x2)": 1.0}
        for name, val in zip(lib.names, row):
            assert val == expect.get(name, 0.0)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(7)
        state = merge_libraries(build_polynomial_library(3, 2), build_fourier_library(3, 2))
        lib = with_control_products(state, 2, 2)
        X = rng.normal(size=(100, 3))
        U = rng.normal(size=(100, 2))
        theta = evaluate(lib, X, U)
        for i in range(0, 100, 7):
            for j, term in enumerate(lib.terms):
                assert abs(theta[i, j] - scalar_oracle(term, X[i], U[i])) <= 1e-14

    def test_scalar_evaluate_matches(self):
        rng = np.random.default_rng(8)
        lib = with_control_products(
            merge_libraries(build_polynomial_library(2, 2), build_fourier_library(2, 2)), 1, 1
        )
        x = rng.normal(size=2)
        u = rng.normal(size=1)
        theta = evaluate(lib, x[None, :], u[None, :])[0]
        for j, term in enumerate(lib.terms):
            assert abs(theta[j] - term.evaluate_scalar(x, u)) < 1e-15

    def test_rowwise_permutation(self):
        rng = np.random.default_rng(9)
        lib = build_polynomial_library(2, 3)
        X = rng.normal(size=(40, 2))
        perm = rng.permutation(40)
        assert np.array_equal(evaluate(lib, X)[perm], evaluate(lib, X[perm]))

    def test_shape_errors(self):
        lib = build_polynomial_library(2, 1)
        with pytest.raises(DimensionError):
            evaluate(lib, np.zeros((5, 3)))
        with pytest.raises(DimensionError):
            evaluate(lib, np.zeros((5, 2)), np.zeros((5, 1)))
        clib = with_control_products(lib, 1, 1)
        with pytest.raises(DimensionError):
            evaluate(clib, np.zeros((5, 2)))


class TestJacobian:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        state = merge_libraries(build_polynomial_library(3, 2), build_fourier_library(3, 2))
        lib = with_control_products(state, 1, 2)
        X = rng.normal(size=(10, 3))
        U = rng.normal(size=(10, 1))
        d_state, d_control = evaluate_jacobian(lib, X, U)
        eps = 1e-7
        for j in range(3):
            Xp, Xm = X.copy(), X.copy()
            Xp[:, j] += eps
            Xm[:, j] -= eps
            fd = (evaluate(lib, Xp, U) - evaluate(lib, Xm, U)) / (2 * eps)
            assert np.max(np.abs(d_state[:, :, j] - fd)) < 1e-6
        Up, Um = U + eps, U - eps
        fd = (evaluate(lib, X, Up) - evaluate(lib, X, Um)) / (2 * eps)
        assert np.max(np.abs(d_control[:, :, 0] - fd)) < 1e-6


class TestSerialization:
    def test_round_trip(self):
        state = merge_libraries(build_polynomial_library(2, 2), build_fourier_library(2, 3))
        lib = with_control_products(state, 1, 1)
        payload = json.loads(json.dumps(library_to_dict(lib)))
        rebuilt = library_from_dict(payload)
        assert rebuilt.names == lib.names
        assert rebuilt.state_dim == lib.state_dim
        assert rebuilt.control_dim == lib.control_dim
        rng = np.random.default_rng(13)
        X = rng.normal(size=(20, 2))
        U = rng.normal(size=(20, 1))
        assert np.array_equal(evaluate(rebuilt, X, U), evaluate(lib, X, U))

    def test_duplicate_names_rejected(self):
        t = TermSpec(exponents=(1, 0))
        with pytest.raises(LibraryConflictError):
            CandidateLibrary((t, t), 2)
