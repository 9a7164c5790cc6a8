"""Solvers for the two convex subproblems of each outer iteration.

SP1: ``min f_0(x) + mu ||x - x_k||^2`` over a :class:`LocalFeasibleSet`,
solved in the m-dimensional dual. For fixed multipliers the Lagrangian
minimiser is available in closed form, the dual is smooth and concave, and
its Hessian is ``-J^T K^{-1} J``, so a projected Newton ascent converges in a
handful of steps.

SP2: the smallest ``||lambda||_inf`` certifying that ``(x_{k+1}, lambda)`` is
an eta/2-approximate KKT pair of SP1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from .core import KnownObjective
from .feasible_set import LocalFeasibleSet


class NonConvergence(RuntimeError):
    """The dual ascent hit its iteration cap. ``solution`` is still feasible."""

    def __init__(self, message: str, solution: "SubproblemSolution"):
        super().__init__(message)
        self.solution = solution


class Sp2WarmStartInvalid(ValueError):
    """The SP1 multipliers do not satisfy the eta/2 certificate."""


@dataclass
class Sp1Instance:
    objective: KnownObjective
    mu: float
    safe_set: LocalFeasibleSet

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")

    @property
    def anchor(self) -> np.ndarray:
        return self.safe_set.anchor

    def value(self, x) -> float:
        s = np.asarray(x, dtype=float) - self.anchor
        return self.objective.value(x) + self.mu * float(s @ s)


@dataclass
class SubproblemSolution:
    x: np.ndarray
    lam: np.ndarray
    duality_gap: float
    stationarity_residual: float
    iterations: int
    objective: float = np.nan
    pulled_back: bool = False


class _Sp1Dual:
    """Closed-form pieces of the SP1 Lagrangian in the step variable s = x - x_k."""

    def __init__(self, inst: Sp1Instance):
        ss = inst.safe_set
        self.mu = inst.mu
        self.f = ss.fvals
        self.G = ss.jacobian
        self.q = ss.curvature
        self.xk = ss.anchor
        obj = inst.objective
        self.cbar = obj.gradient(self.xk)
        h = obj.hessian if obj.hessian is not None else np.zeros((self.xk.size,) * 2)
        self.H = h
        self.evals, self.evecs = np.linalg.eigh(h)
        self.evals = np.clip(self.evals, 0.0, None)

    def step(self, lam):
        sigma = self.mu + float(self.q @ lam)
        r = self.cbar + self.G.T @ lam
        diag = self.evals + 2.0 * sigma
        s = -self.evecs @ ((self.evecs.T @ r) / diag)
        return s, diag

    def cons(self, s) -> np.ndarray:
        return self.f + self.G @ s + self.q * float(s @ s)

    def primal(self, s) -> float:
        # objective change relative to the anchor
        return float(self.cbar @ s) + 0.5 * float(s @ self.H @ s) + self.mu * float(s @ s)

    def evaluate(self, lam):
        s, diag = self.step(lam)
        c = self.cons(s)
        phi = self.primal(s) + float(lam @ c)
        return phi, c, s, diag

    def hessian(self, s, diag, idx) -> np.ndarray:
        J = self.G[idx] + 2.0 * self.q[idx, None] * s[None, :]
        W = J @ self.evecs
        return (W / diag) @ W.T

    def stationarity(self, s, lam) -> float:
        grad = self.cbar + self.H @ s + 2.0 * self.mu * s + self.G.T @ lam + 2.0 * float(self.q @ lam) * s
        return float(np.linalg.norm(grad))


def _pull_back(dual: _Sp1Dual, s: np.ndarray) -> np.ndarray:
    """Largest ``t * s`` (t in [0, 1]) satisfying every ball constraint."""
    def ok(step):
        # test the step that survives the round trip through x = x_k + step
        return bool(np.all(dual.cons((dual.xk + step) - dual.xk) <= 0))

    if ok(s):
        return s
    a = dual.q * float(s @ s)
    b = dual.G @ s
    t = 1.0
    for fi, bi, ai in zip(dual.f, b, a):
        # fi + bi t + ai t^2 <= 0 with fi < 0, ai >= 0: feasible on [0, root]
        if fi + bi + ai <= 0:
            continue
        if ai > 0:
            disc = bi * bi - 4.0 * ai * fi
            root = (-bi + np.sqrt(disc)) / (2.0 * ai)
            if bi > 0:
                root = (-2.0 * fi) / (bi + np.sqrt(disc))
        else:
            root = -fi / bi
        t = min(t, root)
    t = max(t, 0.0)
    # back off from the root by as little as rounding allows
    shrink = np.finfo(float).eps
    for _ in range(64):
        s_new = t * s
        if ok(s_new):
            return s_new
        t *= 1.0 - shrink
        shrink *= 2.0
    return np.zeros_like(s)


def solve_sp1(
    inst: Sp1Instance,
    tol: float = 1e-9,
    max_iter: int = 10_000,
    warm: np.ndarray | None = None,
    armijo: float = 1e-4,
) -> SubproblemSolution:
    """Primal and dual optimum of SP1 by projected Newton ascent on the dual.

    Stops when the projected dual gradient, the duality gap and the primal
    infeasibility are all below ``tol``. The returned primal point is always
    inside the safe set; if the dual iterate's minimiser sits marginally
    outside, it is pulled back along the segment to the anchor.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    dual = _Sp1Dual(inst)
    m = dual.f.size
    lam = np.zeros(m) if warm is None else np.maximum(np.asarray(warm, dtype=float), 0.0)
    phi, c, s, diag = dual.evaluate(lam)
    # Newton converges quadratically at the end, so iterate past tol to keep
    # the pulled-back primal point's stationarity residual below tol.
    inner = 1e-3 * tol
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        gap = -float(lam @ c)
        infeas = float(np.max(c, initial=0.0))
        pg = np.abs(lam - np.maximum(lam + c, 0.0)).max()
        if pg <= inner and abs(gap) <= inner and infeas <= inner:
            converged = True
            break
        eps = min(1e-8, pg)
        binding = (lam <= eps) & (c <= 0)
        free = ~binding
        d = np.zeros(m)
        d[binding] = c[binding]
        if free.any():
            idx = np.flatnonzero(free)
            P = dual.hessian(s, diag, idx)
            ridge = 1e-14 * max(1.0, float(np.trace(P)))
            try:
                d[idx] = np.linalg.solve(P + ridge * np.eye(idx.size), c[idx])
            except np.linalg.LinAlgError:
                d[idx] = c[idx]
        accepted = False
        # ascent below a few ulps of phi is invisible; let Newton finish
        slack = 8.0 * np.finfo(float).eps * max(1.0, abs(phi))
        for direction in (d, c):
            alpha = 1.0
            for _ in range(60):
                lam_new = np.maximum(lam + alpha * direction, 0.0)
                phi_new, c_new, s_new, diag_new = dual.evaluate(lam_new)
                if phi_new >= phi + armijo * float(c @ (lam_new - lam)) - slack:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
        if not accepted or np.array_equal(lam_new, lam):
            # no ascent possible at working precision
            converged = max(pg, abs(gap), infeas) <= tol
            break
        lam, phi, c, s, diag = lam_new, phi_new, c_new, s_new, diag_new

    s_feas = _pull_back(dual, s)
    pulled = not np.array_equal(s_feas, s)
    if dual.primal(s_feas) > 0:
        # never worse than staying put
        s_feas = np.zeros_like(s)
        pulled = True
    x = dual.xk + s_feas
    sol = SubproblemSolution(
        x=x,
        lam=lam,
        duality_gap=max(0.0, dual.primal(s_feas) - phi),
        stationarity_residual=dual.stationarity(s_feas, lam),
        iterations=it,
        objective=inst.value(x),
        pulled_back=pulled,
    )
    if not converged:
        raise NonConvergence(f"SP1 dual ascent did not converge in {max_iter} iterations", sol)
    return sol


@dataclass
class Sp2Instance:
    grad_f0_next: np.ndarray
    step: np.ndarray
    gradients: np.ndarray
    fvals: np.ndarray
    M: np.ndarray
    mu: float
    eta: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        self.grad_f0_next = np.asarray(self.grad_f0_next, dtype=float).ravel()
        self.step = np.asarray(self.step, dtype=float).ravel()
        self.gradients = np.atleast_2d(np.asarray(self.gradients, dtype=float))
        self.fvals = np.atleast_1d(np.asarray(self.fvals, dtype=float))
        self.M = np.broadcast_to(np.asarray(self.M, dtype=float), self.fvals.shape).copy()

    @property
    def A(self) -> np.ndarray:
        """Columns ``g_i + 4 M_i (x_{k+1} - x_k)``."""
        return (self.gradients + 4.0 * self.M[:, None] * self.step[None, :]).T

    @property
    def b(self) -> np.ndarray:
        return self.grad_f0_next + 2.0 * self.mu * self.step

    @property
    def slack(self) -> np.ndarray:
        """Local model value of each constraint at ``x_{k+1}``."""
        s = self.step
        return self.fvals + self.gradients @ s + 2.0 * self.M * float(s @ s)

    def deltas(self, lam) -> tuple[float, np.ndarray]:
        lam = np.asarray(lam, dtype=float)
        return float(np.linalg.norm(self.A @ lam + self.b)), np.abs(lam * self.slack)

    def certifies(self, lam) -> bool:
        d1, d2 = self.deltas(lam)
        half = self.eta / 2.0
        return d1 <= half and bool(np.all(d2 <= half))


def solve_sp2(inst: Sp2Instance, warm, tol: float = 1e-9) -> tuple[np.ndarray, bool]:
    """Minimum infinity-norm multipliers satisfying the eta/2 certificate.

    Bisection on the level t in ``[0, ||warm||_inf]``; each level is a
    bounded least-squares feasibility problem.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    warm = np.asarray(warm, dtype=float).ravel()
    half = inst.eta / 2.0
    if np.any(warm < 0) or not inst.certifies(warm):
        d1, d2 = inst.deltas(np.maximum(warm, 0.0))
        raise Sp2WarmStartInvalid(f"warm start violates the certificate: delta1={d1:.3e}, max delta2={d2.max():.3e}")
    m = warm.size
    if inst.certifies(np.zeros(m)):
        return np.zeros(m), True

    A, b = inst.A, inst.b
    slack = np.abs(inst.slack)
    with np.errstate(divide="ignore"):
        cap = np.where(slack > 0, half / slack, np.inf)

    def attempt(t):
        upper = np.minimum(t, cap)
        if np.all(upper <= 0):
            lam = np.zeros(m)
        else:
            lo = np.zeros(m)
            hi = np.maximum(upper, 1e-300)
            res = lsq_linear(A, -b, bounds=(lo, hi), method="bvls", tol=1e-14)
            lam = np.clip(res.x, 0.0, upper)
        return lam if inst.certifies(lam) else None

    lo, hi = 0.0, float(warm.max())
    best = warm
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lam = attempt(mid)
        if lam is None:
            lo = mid
        else:
            hi = mid
            best = lam
    return best, inst.certifies(best)
