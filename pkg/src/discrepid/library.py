"""Candidate-function libraries.

A library is an ordered list of term specifications over ``n`` state
variables (and optionally ``r`` control variables).  Evaluating a library on
a data matrix produces the regression design matrix with one position-stable
column per term.  Terms are products of a state monomial, single-variable
trigonometric factors, and a control monomial, which covers constants,
polynomials, Fourier terms, trig products, and state-control cross terms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, LibraryConflictError, ParameterError

KIND_CONSTANT = "constant"
KIND_MONOMIAL = "monomial"
KIND_TRIG = "trig"
KIND_TRIG_PRODUCT = "trig-product"
KIND_CONTROL_CROSS = "control-cross"

_TRIG_FUNCS = {"sin": np.sin, "cos": np.cos}


@dataclass(frozen=True)
class TermSpec:
    """One candidate function: state monomial x trig factors x control monomial.

    ``trig`` holds ``(func, var, freq)`` triples with ``func`` in
    {"sin", "cos"}, ``var`` a state index, and ``freq`` a positive integer.
    """

    exponents: tuple[int, ...] = ()
    trig: tuple[tuple[str, int, int], ...] = ()
    control_exponents: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))
        object.__setattr__(self, "control_exponents", tuple(int(e) for e in self.control_exponents))
        trig = tuple((str(f), int(v), int(k)) for f, v, k in self.trig)
        object.__setattr__(self, "trig", trig)
        if any(e < 0 for e in self.exponents + self.control_exponents):
            raise ParameterError("negative exponents are not supported")
        for func, _, freq in trig:
            if func not in _TRIG_FUNCS:
                raise ParameterError(f"unknown trig function '{func}'")
            if freq < 1:
                raise ParameterError("trig frequencies must be positive integers")

    @property
    def kind(self) -> str:
        has_mono = any(self.exponents)
        has_ctrl = any(self.control_exponents)
        if has_ctrl:
            return KIND_CONTROL_CROSS
        if self.trig:
            if has_mono or len(self.trig) > 1:
                return KIND_TRIG_PRODUCT
            return KIND_TRIG
        if has_mono:
            return KIND_MONOMIAL
        return KIND_CONSTANT

    @property
    def name(self) -> str:
        parts = []
        for i, e in enumerate(self.exponents):
            if e == 1:
                parts.append(f"x{i + 1}")
            elif e > 1:
                parts.append(f"x{i + 1}^{e}")
        for func, var, freq in self.trig:
            arg = f"x{var + 1}" if freq == 1 else f"{freq}*x{var + 1}"
            parts.append(f"{func}({arg})")
        for i, e in enumerate(self.control_exponents):
            if e == 1:
                parts.append(f"u{i + 1}")
            elif e > 1:
                parts.append(f"u{i + 1}^{e}")
        return "*".join(parts) if parts else "1"

    def evaluate(self, X: np.ndarray, U: np.ndarray | None = None) -> np.ndarray:
        """Columnwise value of the term at the given samples."""
        m = X.shape[0]
        col = np.ones(m)
        for i, e in enumerate(self.exponents):
            if e:
                col = col * X[:, i] ** e
        for func, var, freq in self.trig:
            col = col * _TRIG_FUNCS[func](freq * X[:, var])
        for i, e in enumerate(self.control_exponents):
            if e:
                col = col * U[:, i] ** e
        return col

    def evaluate_scalar(self, x, u=None) -> float:
        """Value at a single sample, avoiding array round trips."""
        v = 1.0
        for i, e in enumerate(self.exponents):
            if e:
                v *= float(x[i]) ** e
        for func, var, freq in self.trig:
            arg = freq * float(x[var])
            v *= math.sin(arg) if func == "sin" else math.cos(arg)
        for i, e in enumerate(self.control_exponents):
            if e:
                v *= float(u[i]) ** e
        return v


@dataclass(frozen=True)
class CandidateLibrary:
    """Ordered, immutable collection of candidate terms."""

    terms: tuple[TermSpec, ...]
    state_dim: int
    control_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        names = [t.name for t in self.terms]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise LibraryConflictError(f"duplicate term names: {sorted(dupes)}")
        for t in self.terms:
            if len(t.exponents) > self.state_dim:
                raise DimensionError(f"term '{t.name}' references more than {self.state_dim} state variables")
            if len(t.control_exponents) > self.control_dim:
                raise DimensionError(f"term '{t.name}' references more than {self.control_dim} control variables")
            for _, var, _ in t.trig:
                if var >= self.state_dim:
                    raise DimensionError(f"term '{t.name}' references state variable {var + 1} beyond dim {self.state_dim}")

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.terms]


def _monomial_sort_key(exps: tuple[int, ...]):
    # Total degree first, mixed terms before pure powers, then higher leading
    # exponents first (1, x1, x2, x1*x2, x1^2, x2^2, x1^2*x2, x1*x2^2, ...).
    return (sum(exps), max(exps, default=0), tuple(-e for e in exps))


def _monomial_exponents(n: int, max_degree: int, include_constant: bool) -> list[tuple[int, ...]]:
    combos = itertools.product(range(max_degree + 1), repeat=n)
    exps = [e for e in combos if any(e) or include_constant]
    exps.sort(key=_monomial_sort_key)
    return exps


def build_polynomial_library(
    n: int,
    max_degree: int,
    include_constant: bool = True,
    max_total_degree: int | None = None,
) -> CandidateLibrary:
    """All monomials with per-variable degree <= max_degree.

    Terms are ordered by total degree, with mixed products ahead of pure
    powers of equal degree; the constant term comes first when included.
    ``max_total_degree`` additionally caps the total degree, which keeps the
    basis small in higher-dimensional state spaces (the per-variable rule
    alone grows as (max_degree+1)^n).
    """
    if n < 1:
        raise ParameterError(f"state dim must be >= 1, got {n}")
    if max_degree < 1:
        raise ParameterError(f"max_degree must be >= 1, got {max_degree}")
    exps = _monomial_exponents(n, max_degree, include_constant)
    if max_total_degree is not None:
        exps = [e for e in exps if sum(e) <= max_total_degree]
    terms = [TermSpec(exponents=e) for e in exps]
    return CandidateLibrary(tuple(terms), n)


def build_fourier_library(
    n: int,
    max_order: int,
    variables: Sequence[int] | None = None,
) -> CandidateLibrary:
    """sin(k*xj) and cos(k*xj) for 1 <= k <= max_order.

    Ordering is variable-major, frequency-minor, sin before cos.  The
    optional ``variables`` sequence restricts which state variables get trig
    terms (default: all of them).
    """
    if max_order < 1:
        raise ParameterError(f"max_order must be >= 1, got {max_order}")
    if variables is None:
        variables = range(n)
    terms = []
    for j in variables:
        if not 0 <= j < n:
            raise DimensionError(f"variable index {j} out of range for state dim {n}")
        for k in range(1, max_order + 1):
            terms.append(TermSpec(trig=(("sin", j, k),)))
            terms.append(TermSpec(trig=(("cos", j, k),)))
    return CandidateLibrary(tuple(terms), n)


def merge_libraries(a: CandidateLibrary, b: CandidateLibrary) -> CandidateLibrary:
    """Concatenate two libraries over identical variable spaces, a then b."""
    if a.state_dim != b.state_dim or a.control_dim != b.control_dim:
        raise DimensionError(
            f"cannot merge libraries over (n={a.state_dim}, r={a.control_dim}) "
            f"and (n={b.state_dim}, r={b.control_dim})"
        )
    overlap = set(a.names) & set(b.names)
    if overlap:
        raise LibraryConflictError(f"duplicate term names: {sorted(overlap)}")
    return CandidateLibrary(a.terms + b.terms, a.state_dim, a.control_dim)


def without_terms(lib: CandidateLibrary, names: Iterable[str]) -> CandidateLibrary:
    """Drop terms by name (e.g. to reproduce a reference column set)."""
    drop = set(names)
    missing = drop - set(lib.names)
    if missing:
        raise ParameterError(f"library has no terms named {sorted(missing)}")
    kept = tuple(t for t in lib.terms if t.name not in drop)
    return CandidateLibrary(kept, lib.state_dim, lib.control_dim)


def with_control_products(lib: CandidateLibrary, r: int, max_u_degree: int) -> CandidateLibrary:
    """Augment a state library with control monomials and cross products.

    For every control monomial of per-variable degree <= max_u_degree (in
    the polynomial builder's ordering) and every existing term, a product
    term is appended; the constant term's products are the pure control
    monomials.
    """
    if r < 1:
        raise ParameterError(f"control dim must be >= 1, got {r}")
    if lib.control_dim != 0:
        raise ParameterError("library already carries control terms")
    base = [TermSpec(t.exponents, t.trig) for t in lib.terms]
    new_terms = list(base)
    for c_exps in _monomial_exponents(r, max_u_degree, include_constant=False):
        for t in base:
            new_terms.append(TermSpec(t.exponents, t.trig, c_exps))
    return CandidateLibrary(tuple(new_terms), lib.state_dim, r)


def _check_eval_args(lib: CandidateLibrary, X: np.ndarray, U: np.ndarray | None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != lib.state_dim:
        raise DimensionError(
            f"library expects {lib.state_dim} state columns, got {X.shape[1]}"
        )
    if lib.control_dim > 0:
        if U is None:
            raise DimensionError("library has control terms but no U was given")
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            U = U[:, None]
        if U.shape != (X.shape[0], lib.control_dim):
            raise DimensionError(
                f"U must be ({X.shape[0]}, {lib.control_dim}), got {U.shape}"
            )
    elif U is not None:
        raise DimensionError("library has no control terms but U was given")
    return X, U


def evaluate(lib: CandidateLibrary, X: np.ndarray, U: np.ndarray | None = None) -> np.ndarray:
    """Design matrix: column j is term j evaluated rowwise on (X, U)."""
    X, U = _check_eval_args(lib, X, U)
    theta = np.empty((X.shape[0], lib.size))
    for j, term in enumerate(lib.terms):
        theta[:, j] = term.evaluate(X, U)
    return theta


def _term_factors(term: TermSpec, X: np.ndarray, U: np.ndarray | None):
    """All multiplicative factors of a term as (m,) columns, tagged by kind."""
    factors = []
    for i, e in enumerate(term.exponents):
        if e:
            factors.append(("x", i, e, X[:, i] ** e))
    for func, var, freq in term.trig:
        factors.append((func, var, freq, _TRIG_FUNCS[func](freq * X[:, var])))
    for i, e in enumerate(term.control_exponents):
        if e:
            factors.append(("u", i, e, U[:, i] ** e))
    return factors


def evaluate_jacobian(
    lib: CandidateLibrary, X: np.ndarray, U: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of every term at every sample.

    Returns ``(d_state, d_control)`` with shapes (m, p, n) and (m, p, r);
    used by gradient-based trajectory optimization on hybrid models.
    """
    X, U = _check_eval_args(lib, X, U)
    m = X.shape[0]
    n, r, p = lib.state_dim, lib.control_dim, lib.size
    d_state = np.zeros((m, p, n))
    d_control = np.zeros((m, p, r))
    for j, term in enumerate(lib.terms):
        factors = _term_factors(term, X, U)
        if not factors:
            continue
        values = np.array([f[3] for f in factors])
        for idx, (kind, var, power, col) in enumerate(factors):
            rest = np.prod(np.delete(values, idx, axis=0), axis=0) if len(factors) > 1 else np.ones(m)
            if kind == "x":
                d_state[:, j, var] += rest * power * X[:, var] ** (power - 1)
            elif kind == "u":
                d_control[:, j, var] += rest * power * U[:, var] ** (power - 1)
            elif kind == "sin":
                d_state[:, j, var] += rest * power * np.cos(power * X[:, var])
            else:  # cos
                d_state[:, j, var] += rest * (-power) * np.sin(power * X[:, var])
    return d_state, d_control


def term_to_dict(term: TermSpec) -> dict:
    return {
        "exponents": list(term.exponents),
        "trig": [list(t) for t in term.trig],
        "control_exponents": list(term.control_exponents),
    }


def term_from_dict(d: dict) -> TermSpec:
    return TermSpec(
        exponents=tuple(d.get("exponents", ())),
        trig=tuple((f, v, k) for f, v, k in d.get("trig", ())),
        control_exponents=tuple(d.get("control_exponents", ())),
    )


def library_to_dict(lib: CandidateLibrary) -> dict:
    return {
        "state_dim": lib.state_dim,
        "control_dim": lib.control_dim,
        "terms": [term_to_dict(t) for t in lib.terms],
    }


def library_from_dict(d: dict) -> CandidateLibrary:
    return CandidateLibrary(
        tuple(term_from_dict(t) for t in d["terms"]),
        int(d["state_dim"]),
        int(d.get("control_dim", 0)),
    )
