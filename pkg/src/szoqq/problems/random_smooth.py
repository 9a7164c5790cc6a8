"""Random convex QCQP instances with exactly known smoothness constants."""

from __future__ import annotations

import numpy as np

from ..core import KnownObjective, SmoothnessParams
from .base import Benchmark


class RandomSmoothInstance(Benchmark):
    """Convex quadratic constraints ``f_i(x) = x^T P_i x / 2 + b_i^T x - s_i``.

    ``x0 = 0`` is strictly feasible since every ``s_i`` lies in ``[0.2, 1]``.
    ``P_1`` is bounded below by ``strong * I``, so the feasible set lies in
    the ball of radius ``R`` around the origin, and on that ball each
    gradient is bounded by ``L_i = ||P_i|| R + ||b_i||``. ``M_i = ||P_i||``.
    The objective ``c^T x`` is linear and known.
    """

    name = "random"

    def __init__(self, seed: int = 0, d: int = 5, m: int = 4, strong: float = 0.5):
        if d < 1 or m < 1:
            raise ValueError("d and m must be positive")
        rng = np.random.default_rng(seed)
        self.seed, self.dimension, self.n_constraints = int(seed), int(d), int(m)
        P = []
        for i in range(m):
            G = rng.normal(size=(d, d))
            Pi = G @ G.T / d
            if i == 0:
                Pi = Pi + strong * np.eye(d)
            P.append(Pi)
        self.P = np.array(P)
        self.b = 0.5 * rng.normal(size=(m, d)) / np.sqrt(d)
        self.s = rng.uniform(0.2, 1.0, size=m)
        c = rng.normal(size=d)
        self.c = c / np.linalg.norm(c)
        self.x0 = np.zeros(d)
        self.known_objective = KnownObjective(self.c.copy())

        lam_min = float(np.linalg.eigvalsh(self.P[0]).min())
        nb = float(np.linalg.norm(self.b[0]))
        self.radius = (nb + np.sqrt(nb**2 + 2.0 * lam_min * self.s[0])) / lam_min
        self.exact_M = np.array([np.linalg.norm(Pi, 2) for Pi in self.P])
        self.exact_L = self.exact_M * self.radius + np.linalg.norm(self.b, axis=1)

    def params(self) -> dict:
        return {"seed": self.seed, "d": self.dimension, "m": self.n_constraints}

    def smoothness(self, factor: float = 1.5) -> SmoothnessParams:
        """Configured constants: the exact ones scaled by ``factor``."""
        return SmoothnessParams(factor * self.exact_L, factor * self.exact_M)

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float))

    def objective_gradient(self, x) -> np.ndarray:
        return self.c.copy()

    def constraints(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("i,kij,j->k", x, self.P, x) + self.b @ x - self.s

    def constraint_jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.P @ x + self.b
