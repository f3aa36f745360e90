"""Evaluable vector fields.

A :class:`DynamicsModel` wraps a right-hand-side function ``f(x, u) -> dx/dt``
together with its state/control dimensions, so integrators and fitting
pipelines can check shapes up front.  Models may optionally carry an analytic
Jacobian used by gradient-based trajectory optimization; models without one
still work everywhere (the optimizer falls back to finite differences).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError

# f(x, u) -> xdot, with u None for uncontrolled models.
RhsFunc = Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray]

# jacobian(X, U) -> (A, B) evaluated at a batch of K states:
#   X: (K, n), U: (K, r) or None, A: (K, n, n), B: (K, n, r).
JacFunc = Callable[[np.ndarray, Optional[np.ndarray]], tuple]


@dataclass(frozen=True)
class DynamicsModel:
    """A vector field ``dx/dt = f(x, u)`` with known dimensions."""

    f: RhsFunc
    state_dim: int
    control_dim: int = 0
    name: str = ""
    jacobian: JacFunc | None = field(default=None, compare=False)

    def __call__(self, x: np.ndarray, u: np.ndarray | None = None) -> np.ndarray:
        return self.f(x, u)

    def check_compatible(self, x: np.ndarray, u: np.ndarray | None) -> None:
        x = np.asarray(x)
        if x.shape[-1] != self.state_dim:
            raise DimensionError(
                f"model '{self.name}' expects state dim {self.state_dim}, "
                f"got {x.shape[-1]}"
            )
        if self.control_dim == 0:
            if u is not None:
                raise DimensionError(
                    f"model '{self.name}' takes no control input"
                )
        elif u is None:
            raise DimensionError(
                f"model '{self.name}' requires a control input of dim "
                f"{self.control_dim}"
            )
