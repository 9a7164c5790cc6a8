"""Domain types, the black-box oracle contract and KKT residual evaluation.

The solver only ever sees a :class:`ProblemOracle`. Ground-truth gradients
live on separate :class:`GroundTruth` objects that only tests and the
``verify`` command touch.
"""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np


class StrictFeasibilityLost(ValueError):
    """A point that must be strictly feasible has some f_i >= 0."""


class ContractViolation(ValueError):
    """An argument breaks an operation's precondition."""


@dataclass(frozen=True)
class KnownObjective:
    """Explicitly known convex objective ``c @ x + 0.5 x @ H @ x + offset``.

    ``hessian=None`` is the linear case. ``H`` must be symmetric positive
    semidefinite so that (SP1) stays convex.
    """

    c: np.ndarray
    offset: float = 0.0
    hessian: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "c", c)
        if self.hessian is not None:
            h = np.asarray(self.hessian, dtype=float)
            if h.shape != (c.size, c.size):
                raise ValueError(f"hessian shape {h.shape} does not match c of size {c.size}")
            if not np.allclose(h, h.T):
                raise ValueError("hessian must be symmetric")
            if np.linalg.eigvalsh(h).min() < -1e-12:
                raise ValueError("hessian must be positive semidefinite")
            object.__setattr__(self, "hessian", h)

    @property
    def is_linear(self) -> bool:
        return self.hessian is None or not np.any(self.hessian)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        v = float(self.c @ x) + self.offset
        if self.hessian is not None:
            v += 0.5 * float(x @ self.hessian @ x)
        return v

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = self.c.copy()
        if self.hessian is not None:
            g = g + self.hessian @ x
        return g


@dataclass(frozen=True)
class SampleRecord:
    """One point query: the point, the values returned and the iteration tag.

    ``indices`` lists which of f_0..f_m were returned (all of them for a
    batched query).
    """

    point: np.ndarray
    indices: tuple[int, ...]
    values: np.ndarray
    tag: int | None = None


class ProblemOracle:
    """Zeroth-order access to f_0, ..., f_m.

    Parameters
    ----------
    dimension : int
        Number of decision variables d.
    n_constraints : int
        Number of unknown constraints m.
    evaluate : callable
        ``evaluate(x) -> array of shape (m + 1,)`` with ``[f_0(x), ..., f_m(x)]``.
        Must be deterministic.
    known_objective : KnownObjective, optional
        Set when f_0 is explicitly known; ``query(x, 0)`` then returns its value.
    concurrent_queries : bool
        Whether ``evaluate`` may be called from several threads at once.
    """

    def __init__(
        self,
        dimension: int,
        n_constraints: int,
        evaluate: Callable[[np.ndarray], np.ndarray],
        known_objective: KnownObjective | None = None,
        concurrent_queries: bool = False,
    ):
        if dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if n_constraints < 1:
            raise ValueError("n_constraints must be a positive integer")
        if known_objective is not None and known_objective.c.size != dimension:
            raise ValueError("known objective dimension mismatch")
        self.dimension = int(dimension)
        self.n_constraints = int(n_constraints)
        self.known_objective = known_objective
        self.concurrent_queries = concurrent_queries
        self._evaluate = evaluate
        self._log: list[SampleRecord] = []
        self._lock = threading.Lock()
        self.oracle_seconds = 0.0
        self.tag: int | None = None

    @property
    def sample_log(self) -> tuple[SampleRecord, ...]:
        return tuple(self._log)

    @property
    def n_point_queries(self) -> int:
        return len(self._log)

    def _check_point(self, x) -> np.ndarray:
        x = np.array(x, dtype=float).ravel()
        if x.size != self.dimension:
            raise ValueError(f"expected a point of dimension {self.dimension}, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise ValueError("query point must be finite")
        return x

    def _raw(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        t0 = time.perf_counter()
        vals = np.array(self._evaluate(x.copy()), dtype=float).ravel()
        dt = time.perf_counter() - t0
        if vals.size != self.n_constraints + 1:
            raise ValueError(f"oracle returned {vals.size} values, expected {self.n_constraints + 1}")
        if self.known_objective is not None:
            vals[0] = self.known_objective.value(x)
        return vals, dt

    def _record(self, rec: SampleRecord, dt: float) -> None:
        with self._lock:
            self._log.append(rec)
            self.oracle_seconds += dt

    def query_all(self, x, tag: int | None = None) -> np.ndarray:
        """Evaluate every function at ``x``; one point query."""
        x = self._check_point(x)
        vals, dt = self._raw(x)
        self._record(
            SampleRecord(x, tuple(range(self.n_constraints + 1)), vals.copy(), self.tag if tag is None else tag), dt
        )
        return vals

    def query(self, x, i: int, tag: int | None = None) -> float:
        """Evaluate f_i at ``x``."""
        if not 0 <= i <= self.n_constraints:
            raise IndexError(f"constraint index {i} out of range 0..{self.n_constraints}")
        x = self._check_point(x)
        vals, dt = self._raw(x)
        self._record(SampleRecord(x, (i,), vals[i : i + 1].copy(), self.tag if tag is None else tag), dt)
        return float(vals[i])

    def clear_log(self) -> None:
        with self._lock:
            self._log.clear()
            self.oracle_seconds = 0.0


class GroundTruth(Protocol):
    """Verification-only access to exact values and gradients."""

    dimension: int
    n_constraints: int

    def objective(self, x) -> float: ...

    def objective_gradient(self, x) -> np.ndarray: ...

    def constraints(self, x) -> np.ndarray: ...

    def constraint_jacobian(self, x) -> np.ndarray: ...


class EpigraphOracle(ProblemOracle):
    """Oracle over ``(x, gamma)`` for min gamma s.t. f_0(x) - gamma <= 0, f_i(x) <= 0.

    Constraint 1 of this oracle is ``f_0(x) - gamma``; constraints 2..m+1 are the
    originals. Queries are forwarded to ``base`` (which logs the x-part).
    """

    def __init__(self, base: ProblemOracle, lipschitz0: float, smoothness0: float):
        d = base.dimension

        def evaluate(z):
            vals = base.query_all(z[:d])
            out = np.empty(base.n_constraints + 2)
            out[0] = z[d]
            out[1] = vals[0] - z[d]
            out[2:] = vals[1:]
            return out

        c = np.zeros(d + 1)
        c[d] = 1.0
        super().__init__(
            d + 1,
            base.n_constraints + 1,
            evaluate,
            known_objective=KnownObjective(c, 0.0),
            concurrent_queries=base.concurrent_queries,
        )
        self.base = base
        self.lipschitz0 = float(lipschitz0)
        self.smoothness0 = float(smoothness0)

    def lift(self, x, margin: float = 1.0) -> np.ndarray:
        """Strictly feasible lifted start ``(x, f_0(x) + margin)``."""
        if margin <= 0:
            raise ValueError("margin must be positive")
        x = np.asarray(x, dtype=float).ravel()
        f0 = self.base.query(x, 0)
        return np.append(x, f0 + margin)

    def lift_smoothness(self, params: "SmoothnessParams") -> "SmoothnessParams":
        """Prepend the constants of the epigraph constraint, ``(L0 + 1, M0)``."""
        return SmoothnessParams(
            np.append(self.lipschitz0 + 1.0, params.L),
            np.append(self.smoothness0, params.M),
            params.growth_factor,
            params.infeasible_sample_count,
        )


def epigraph_reformulate(oracle: ProblemOracle, L0: float, M0: float) -> ProblemOracle:
    """Turn an unknown objective into a constraint with linear objective gamma.

    Oracles whose objective is already known are returned unchanged.
    """
    if oracle.dimension < 1:
        raise ValueError("cannot reformulate a zero-dimensional problem")
    if oracle.known_objective is not None:
        return oracle
    if L0 <= 0 or M0 <= 0:
        raise ValueError("L0 and M0 must be positive")
    return EpigraphOracle(oracle, L0, M0)


class EpigraphTruth:
    """Ground truth of the lifted problem, built from the original one."""

    def __init__(self, base: GroundTruth):
        self.base = base
        self.dimension = base.dimension + 1
        self.n_constraints = base.n_constraints + 1

    def objective(self, z) -> float:
        return float(z[-1])

    def objective_gradient(self, z) -> np.ndarray:
        g = np.zeros(self.dimension)
        g[-1] = 1.0
        return g

    def constraints(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        x = z[:-1]
        return np.append(self.base.objective(x) - z[-1], self.base.constraints(x))

    def constraint_jacobian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        x = z[:-1]
        jac = np.zeros((self.n_constraints, self.dimension))
        jac[0, :-1] = self.base.objective_gradient(x)
        jac[0, -1] = -1.0
        jac[1:, :-1] = self.base.constraint_jacobian(x)
        return jac


@dataclass
class SmoothnessParams:
    """Per-constraint Lipschitz constants L and smoothness constants M."""

    L: np.ndarray
    M: np.ndarray
    growth_factor: float = 2.0
    infeasible_sample_count: int = 0

    def __post_init__(self):
        self.L = np.atleast_1d(np.asarray(self.L, dtype=float)).copy()
        self.M = np.atleast_1d(np.asarray(self.M, dtype=float)).copy()
        if self.L.shape != self.M.shape:
            raise ValueError("L and M must have the same length")
        if np.any(self.L <= 0) or np.any(self.M <= 0):
            raise ValueError("all Lipschitz and smoothness constants must be strictly positive")
        if self.growth_factor <= 1:
            raise ValueError("growth_factor must exceed 1")
        if self.infeasible_sample_count < 0:
            raise ValueError("infeasible_sample_count must be nonnegative")

    @classmethod
    def uniform(cls, m: int, L: float, M: float, growth_factor: float = 2.0) -> "SmoothnessParams":
        return cls(np.full(m, float(L)), np.full(m, float(M)), growth_factor)

    @property
    def m(self) -> int:
        return self.L.size

    @property
    def L_max(self) -> float:
        return float(self.L.max())

    @property
    def M_max(self) -> float:
        return float(self.M.max())


@dataclass
class AlgorithmConfig:
    """Tuning parameters of the outer loop.

    ``xi="auto"`` resolves to ``threshold_xi`` of the current dual bound and is
    re-resolved whenever the dual bound grows.
    """

    mu: float
    eta: float
    lambda_bound: float
    kappa: float = 2.0
    xi: float | str = "auto"
    max_iterations: int = 100_000
    adapt_lambda: bool = True
    adapt_constants: bool = True
    sp1_tol: float = 1e-9
    sp2_tol: float = 1e-9
    sp1_max_iter: int = 10_000

    def __post_init__(self):
        if self.mu <= 0 or self.eta <= 0 or self.lambda_bound <= 0:
            raise ValueError("mu, eta and lambda_bound must be positive")
        if self.kappa <= 1:
            raise ValueError("kappa must exceed 1")
        if isinstance(self.xi, str):
            if self.xi != "auto":
                raise ValueError("xi must be a positive number or 'auto'")
        elif self.xi <= 0:
            raise ValueError("xi must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.sp1_tol <= 0 or self.sp2_tol <= 0:
            raise ValueError("solver tolerances must be positive")


@dataclass(frozen=True)
class KktResidual:
    stationarity: float
    complementarity: np.ndarray
    primal_feasible: bool

    @property
    def max_residual(self) -> float:
        comp = float(self.complementarity.max()) if self.complementarity.size else 0.0
        return max(self.stationarity, comp)

    def is_eta_kkt(self, eta: float) -> bool:
        return self.primal_feasible and self.max_residual <= eta


def kkt_residual(truth: GroundTruth, x, lam) -> KktResidual:
    """Exact stationarity and complementarity residuals at ``(x, lam)``."""
    x = np.asarray(x, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size != truth.n_constraints:
        raise ContractViolation(f"expected {truth.n_constraints} multipliers, got {lam.size}")
    if np.any(lam < 0):
        raise ContractViolation("multipliers must be nonnegative")
    fx = np.asarray(truth.constraints(x), dtype=float)
    jac = np.asarray(truth.constraint_jacobian(x), dtype=float)
    grad = np.asarray(truth.objective_gradient(x), dtype=float) + jac.T @ lam
    return KktResidual(
        stationarity=float(np.linalg.norm(grad)),
        complementarity=np.abs(lam * fx),
        primal_feasible=bool(np.all(fx <= 0)),
    )


class TerminationReason(str, enum.Enum):
    BOTH_CONDITIONS_MET = "BothConditionsMet"
    MAX_ITERATIONS = "MaxIterations"
    ORACLE_ERROR = "OracleError"


@dataclass
class TerminationReport:
    x_tilde: np.ndarray
    lambda_tilde: np.ndarray
    k_tilde: int
    reason: TerminationReason
    lambda_bound: float
    residual: KktResidual | None = None
    smoothness: SmoothnessParams | None = None
    xi: float | None = None
    n_point_queries: int = 0
    message: str = ""
    extra: dict = field(default_factory=dict)
