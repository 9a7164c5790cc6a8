"""Forward finite-difference gradients with a feasibility-preserving step."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import ProblemOracle, StrictFeasibilityLost


@dataclass(frozen=True)
class GradientEstimate:
    """Forward-difference gradient ``g`` with step ``nu``.

    ``error_bound`` is ``sqrt(d) * M_i / 2 * nu``, the worst-case distance to the
    true gradient when M_i bounds the gradient's Lipschitz constant.
    """

    g: np.ndarray
    nu: float
    error_bound: float
    samples_used: int


class InfeasibleSample(RuntimeError):
    """The oracle returned f_i > 0 at a probe point."""

    def __init__(self, point: np.ndarray, values: np.ndarray):
        self.point = point
        self.values = values
        bad = np.flatnonzero(values[1:] > 0) + 1
        super().__init__(f"infeasible sample, violated constraints {bad.tolist()}")


def error_bound(d: int, M_i: float, nu: float) -> float:
    return math.sqrt(d) * M_i / 2.0 * nu


def safe_radius(fvals, L_max: float) -> float:
    """Radius ``min_i -f_i(x) / L_max`` of a ball around x that stays feasible."""
    fvals = np.atleast_1d(np.asarray(fvals, dtype=float))
    if L_max <= 0:
        raise ValueError("L_max must be positive")
    if np.any(fvals >= 0):
        raise StrictFeasibilityLost(f"constraint values {fvals[fvals >= 0].tolist()} are not strictly negative")
    return float(np.min(-fvals) / L_max)


def step_size(l_star: float, k: int, eta: float, alpha_max: float, m: int, lam: float, d: int) -> float:
    """Finite-difference step ``min(l*/sqrt(d), 1/k, eta / (12 alpha_max m Lambda))``.

    ``k = 0`` drops the ``1/k`` term.
    """
    if l_star <= 0 or eta <= 0 or alpha_max <= 0 or m < 1 or lam <= 0 or d < 1 or k < 0:
        raise ValueError("step_size arguments must be positive")
    terms = [l_star / math.sqrt(d), eta / (12.0 * alpha_max * m * lam)]
    if k >= 1:
        terms.append(1.0 / k)
    return min(terms)


def estimate_gradient(oracle: ProblemOracle, x, i: int, nu: float, M_i: float, base_value: float | None = None):
    """Forward-difference estimate of the gradient of f_i at ``x``.

    ``base_value`` is f_i(x) when already known; otherwise it is queried.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    x = np.asarray(x, dtype=float).ravel()
    d = x.size
    f_x = oracle.query(x, i) if base_value is None else float(base_value)
    g = np.empty(d)
    for j in range(d):
        xp = x.copy()
        xp[j] += nu
        g[j] = (oracle.query(xp, i) - f_x) / nu
    return GradientEstimate(g, nu, error_bound(d, M_i, nu), d + (1 if base_value is None else 0))


def estimate_gradients(
    oracle: ProblemOracle,
    x,
    base_values,
    nu: float,
    M,
    check_feasibility: bool = True,
    max_workers: int | None = None,
) -> list[GradientEstimate]:
    """Estimate all m constraint gradients from d batched point queries.

    ``base_values`` is the full ``[f_0(x), ..., f_m(x)]`` vector from one
    ``query_all``. With ``check_feasibility`` an :class:`InfeasibleSample` is
    raised at the first probe with some f_i > 0; sequential probing stops
    there.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    x = np.asarray(x, dtype=float).ravel()
    base_values = np.asarray(base_values, dtype=float)
    d = x.size
    m = oracle.n_constraints
    M = np.broadcast_to(np.asarray(M, dtype=float), (m,))

    def probe(j):
        xp = x.copy()
        xp[j] += nu
        return xp, oracle.query_all(xp)

    rows = np.empty((d, m + 1))
    if max_workers and max_workers > 1 and oracle.concurrent_queries:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(probe, range(d)))
        for j, (xp, vals) in enumerate(results):
            rows[j] = vals
        if check_feasibility:
            for xp, vals in results:
                if np.any(vals[1:] > 0):
                    raise InfeasibleSample(xp, vals)
    else:
        for j in range(d):
            xp, vals = probe(j)
            if check_feasibility and np.any(vals[1:] > 0):
                raise InfeasibleSample(xp, vals)
            rows[j] = vals

    jac = (rows[:, 1:] - base_values[1:]).T / nu
    return [GradientEstimate(jac[i].copy(), nu, error_bound(d, M[i], nu), d + 1) for i in range(m)]
