"""Two-dimensional nonconvex QCQP whose optimum sits on a curved boundary."""

from __future__ import annotations

import numpy as np

from ..core import KnownObjective
from .base import Benchmark

_SHIFT = np.array([0.5, -0.5])


class ToyProblem(Benchmark):
    """min 0.1 x1^2 + x2  s.t.  0.5 - ||x + (0.5, -0.5)||^2 <= 0, x2 - 1 <= 0, x1^2 - x2 <= 0.

    The unique optimum is the origin, where only the third constraint is
    active with multiplier 1. ``objective_known=False`` hides f_0 behind the
    oracle so that the epigraph path gets exercised.
    """

    name = "toy"
    dimension = 2
    n_constraints = 3
    x_star = np.zeros(2)
    f_star = 0.0
    lambda_star = np.array([0.0, 0.0, 1.0])
    # smoothness constants of f_1..f_3 computed from the Hessians
    exact_smoothness = np.array([2.0, 0.0, 2.0])

    def __init__(self, objective_known: bool = True):
        self.objective_known = objective_known
        self.x0 = np.array([0.9, 0.9])
        self.known_objective = (
            KnownObjective(np.array([0.0, 1.0]), 0.0, np.diag([0.2, 0.0])) if objective_known else None
        )

    def params(self) -> dict:
        return {"objective_known": self.objective_known}

    def objective(self, x) -> float:
        return 0.1 * x[0] ** 2 + x[1]

    def objective_gradient(self, x) -> np.ndarray:
        return np.array([0.2 * x[0], 1.0])

    def constraints(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x + _SHIFT
        return np.array([0.5 - y @ y, x[1] - 1.0, x[0] ** 2 - x[1]])

    def constraint_jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([-2.0 * (x + _SHIFT), [0.0, 1.0], [2.0 * x[0], -1.0]])
