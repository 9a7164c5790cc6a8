"""Open-loop optimal control of a planar system with an unmodelled disturbance.

Decision variable: six inputs u_0..u_5 in R^2 stacked into R^12. Dynamics
``x_{k+1} = A x_k + B u_k + 0.1 (x_k^(2))^2 e_1`` from ``x_0 = (1, 1)``; cost
``sum_k x_{k+1}^T Q x_{k+1} + u_k^T R u_k``. The infinity-norm bounds on states
and inputs are split into 48 smooth linear inequalities ``+-x_j <= b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .base import Benchmark


def _load_data() -> dict:
    with resources.files("szoqq.problems").joinpath("control_data.json").open() as fh:
        return json.load(fh)


@dataclass
class Rollout:
    states: np.ndarray
    cost: float
    constraint_values: np.ndarray


class ControlProblem(Benchmark):
    name = "control"

    def __init__(
        self,
        A=((1.1, 1.0), (-0.5, 1.1)),
        B=((1.0, 0.0), (0.0, 1.0)),
        x_init=(1.0, 1.0),
        horizon: int = 6,
        q: float = 0.5,
        r: float = 2.0,
        state_bound: float = 0.7,
        input_bound: float = 1.6,
        disturbance: float = 0.1,
        u_init=None,
    ):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.x_init = np.asarray(x_init, dtype=float)
        self.horizon = int(horizon)
        self.q = float(q)
        self.r = float(r)
        self.state_bound = float(state_bound)
        self.input_bound = float(input_bound)
        self.disturbance = float(disturbance)
        self.dimension = 2 * self.horizon
        self.n_constraints = 8 * self.horizon
        self.known_objective = None
        if u_init is None:
            u_init = _load_data()["u_feasible_init"]
        self.x0 = np.asarray(u_init, dtype=float)

    @property
    def u_feasible_init(self) -> np.ndarray:
        return self.x0

    @staticmethod
    def reference() -> dict:
        """Offline true-model solution and provenance of the stored data."""
        return _load_data()

    def params(self) -> dict:
        return {"input_bound": self.input_bound}

    def _step(self, x, u):
        return self.A @ x + self.B @ u + np.array([self.disturbance * x[1] ** 2, 0.0])

    def _step_jacobian(self, x):
        return self.A + np.array([[0.0, 2.0 * self.disturbance * x[1]], [0.0, 0.0]])

    def rollout(self, u) -> Rollout:
        u = np.asarray(u, dtype=float).reshape(self.horizon, 2)
        x = self.x_init
        states = np.empty((self.horizon, 2))
        cost = 0.0
        for k in range(self.horizon):
            x = self._step(x, u[k])
            states[k] = x
            cost += self.q * float(x @ x) + self.r * float(u[k] @ u[k])
        return Rollout(states, cost, self._constraint_values(states, u))

    def _constraint_values(self, states, u) -> np.ndarray:
        xs = states.ravel()
        us = u.ravel()
        b_x, b_u = self.state_bound, self.input_bound
        return np.concatenate([
            np.column_stack([xs - b_x, -xs - b_x]).ravel(),
            np.column_stack([us - b_u, -us - b_u]).ravel(),
        ])

    def _sensitivities(self, u):
        """States and d x_{k+1} / d u for every k, by forward propagation."""
        u = np.asarray(u, dtype=float).reshape(self.horizon, 2)
        n = self.dimension
        x = self.x_init
        dx = np.zeros((2, n))
        states = np.empty((self.horizon, 2))
        sens = np.empty((self.horizon, 2, n))
        for k in range(self.horizon):
            jac = self._step_jacobian(x)
            dx = jac @ dx
            dx[:, 2 * k : 2 * k + 2] += self.B
            x = self._step(x, u[k])
            states[k] = x
            sens[k] = dx
        return states, sens

    def objective(self, u) -> float:
        return self.rollout(u).cost

    def objective_gradient(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        states, sens = self._sensitivities(u)
        grad = 2.0 * self.r * u
        for k in range(self.horizon):
            grad = grad + 2.0 * self.q * states[k] @ sens[k]
        return grad

    def constraints(self, u) -> np.ndarray:
        return self.rollout(u).constraint_values

    def constraint_jacobian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        _, sens = self._sensitivities(u)
        n = self.dimension
        dxs = sens.reshape(2 * self.horizon, n)
        state_rows = np.empty((4 * self.horizon, n))
        state_rows[0::2] = dxs
        state_rows[1::2] = -dxs
        eye = np.eye(n)
        input_rows = np.empty((2 * n, n))
        input_rows[0::2] = eye
        input_rows[1::2] = -eye
        return np.vstack([state_rows, input_rows])
