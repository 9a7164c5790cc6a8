"""Local feasible sets as intersections of balls.

Each constraint's local model ``f_i(x_k) + g_i @ (x - x_k) + q_i ||x - x_k||^2``
with ``q_i = 2 M_i`` is nonpositive exactly on one ball; the safe set is the
intersection of those balls. The Lipschitz-only comparison set uses balls
centred at the anchor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import StrictFeasibilityLost
from .gradient import GradientEstimate

_log = logging.getLogger(__name__)

MIN_RADIUS_SCALE = 1e-12


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).ravel())
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, x, slack: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.center.size:
            raise ValueError(f"dimension mismatch: ball in R^{self.center.size}, point in R^{x.size}")
        return bool(np.linalg.norm(x - self.center) <= self.radius + slack)


def quadratic_ball(anchor, fval: float, g, curvature: float) -> tuple[Ball, bool]:
    """Ball equal to ``{x : fval + g @ (x - anchor) + curvature ||x - anchor||^2 <= 0}``.

    Returns the ball and whether the radius had to be clamped because the
    radicand came out nonpositive in floating point.
    """
    anchor = np.asarray(anchor, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    if curvature <= 0:
        raise ValueError("curvature must be positive")
    center = anchor - g / (2.0 * curvature)
    r2 = -fval / curvature + float(g @ g) / (4.0 * curvature**2)
    floor = MIN_RADIUS_SCALE * max(1.0, float(np.linalg.norm(anchor)))
    clamped = not r2 > floor**2
    radius = floor if clamped else float(np.sqrt(r2))
    return Ball(center, radius), clamped


@dataclass
class LocalFeasibleSet:
    """Intersection of m balls around the anchor ``x_k``.

    ``fvals``, ``gradients`` and ``curvature`` keep the quadratic form of each
    ball so that the subproblem solvers can evaluate constraints without the
    cancellation that the centre/radius form suffers near the boundary.
    ``gradients`` is None for the Lipschitz-only set.
    """

    balls: list[Ball]
    anchor: np.ndarray
    fvals: np.ndarray
    M: np.ndarray
    gradients: list[GradientEstimate] | None = None
    curvature: np.ndarray | None = None
    clamped: list[int] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.balls)

    @property
    def dimension(self) -> int:
        return self.anchor.size

    @property
    def jacobian(self) -> np.ndarray:
        """Estimated gradients stacked as an ``(m, d)`` array."""
        return np.array([g.g for g in self.gradients])

    def model_values(self, x) -> np.ndarray:
        """Local quadratic models of f_1..f_m at ``x`` (nonpositive inside)."""
        s = np.asarray(x, dtype=float).ravel() - self.anchor
        return self.fvals + self.jacobian @ s + self.curvature * float(s @ s)

    def contains(self, x, slack: float = 0.0) -> bool:
        return all(b.contains(x, slack) for b in self.balls)


def _check_fvals(fvals) -> np.ndarray:
    fvals = np.atleast_1d(np.asarray(fvals, dtype=float))
    if np.any(fvals >= 0):
        raise StrictFeasibilityLost(f"constraint values {fvals[fvals >= 0].tolist()} are not strictly negative")
    return fvals


def build_safe_set(anchor, fvals, gradients: Sequence[GradientEstimate], M) -> LocalFeasibleSet:
    """Safe set around a strictly feasible ``anchor`` from estimated gradients."""
    anchor = np.asarray(anchor, dtype=float).ravel()
    fvals = _check_fvals(fvals)
    M = np.broadcast_to(np.asarray(M, dtype=float), fvals.shape).copy()
    if len(gradients) != fvals.size:
        raise ValueError("need one gradient estimate per constraint")
    curvature = 2.0 * M
    balls, clamped = [], []
    for i, (f, est) in enumerate(zip(fvals, gradients)):
        ball, was_clamped = quadratic_ball(anchor, f, est.g, curvature[i])
        if was_clamped:
            _log.debug("radius of ball %d clamped to %g", i, ball.radius)
            clamped.append(i)
        balls.append(ball)
    return LocalFeasibleSet(balls, anchor, fvals, M, list(gradients), curvature, clamped)


def lipschitz_set(anchor, fvals, L) -> LocalFeasibleSet:
    """Balls of radius ``-f_i / L_i`` centred at the anchor."""
    anchor = np.asarray(anchor, dtype=float).ravel()
    fvals = _check_fvals(fvals)
    L = np.broadcast_to(np.asarray(L, dtype=float), fvals.shape)
    balls = [Ball(anchor.copy(), float(-f / l)) for f, l in zip(fvals, L)]
    return LocalFeasibleSet(balls, anchor, fvals, np.full(fvals.shape, np.nan))


def contains(safe_set: LocalFeasibleSet, x) -> bool:
    return safe_set.contains(x)


def ball_containment(inner: Ball, outer: Ball) -> bool:
    """Whether ``inner`` lies inside ``outer``."""
    gap = float(np.linalg.norm(inner.center - outer.center))
    return gap + inner.radius <= outer.radius


def sample_in_set(safe_set: LocalFeasibleSet, n: int, rng: np.random.Generator, max_rounds: int = 1000) -> np.ndarray:
    """Uniform samples from the set by rejection.

    Proposals are uniform in the smallest ball (a box proposal accepts almost
    nothing once d exceeds a handful), so the accepted points are uniform on
    the intersection.
    """
    smallest = min(safe_set.balls, key=lambda b: b.radius)
    d = safe_set.dimension
    batch = max(4 * n, 256)
    out = []
    total = 0
    for _ in range(max_rounds):
        direction = rng.normal(size=(batch, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = smallest.radius * rng.uniform(size=(batch, 1)) ** (1.0 / d)
        cand = smallest.center + radius * direction
        ok = np.ones(batch, dtype=bool)
        for b in safe_set.balls:
            ok &= np.linalg.norm(cand - b.center, axis=1) <= b.radius
        out.append(cand[ok])
        total += int(ok.sum())
        if total >= n:
            break
    pts = np.concatenate(out)[:n]
    if len(pts) < n:
        raise RuntimeError(f"rejection sampling produced only {len(pts)} of {n} points")
    return pts
