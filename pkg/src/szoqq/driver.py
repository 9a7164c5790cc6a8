"""Outer loop: safe set, SP1, termination test via SP2, constant adaptation."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import (
    AlgorithmConfig,
    ProblemOracle,
    SmoothnessParams,
    StrictFeasibilityLost,
    TerminationReason,
    TerminationReport,
)
from .feasible_set import build_safe_set
from .gradient import InfeasibleSample, estimate_gradients, safe_radius, step_size
from .qcqp import NonConvergence, Sp1Instance, Sp2Instance, Sp2WarmStartInvalid, solve_sp1, solve_sp2

_log = logging.getLogger(__name__)

EVENT_CONSTANTS = "constant-doubling"
EVENT_LAMBDA = "lambda-update"
EVENT_CLAMP = "radius-clamp"
EVENT_SP1 = "sp1-nonconvergence"
EVENT_SP2 = "sp2-warm-start-invalid"

# below this relative probe spacing, forward differences only see rounding noise
NU_FLOOR = 1e-13


@dataclass
class IterationRecord:
    """Quantities of one completed outer iteration.

    ``f0`` is the objective at the anchor ``x_k``; ``x_next`` is the SP1
    solution. SP2 fields stay None unless the step test passed.
    """

    k: int
    x_k: np.ndarray
    x_next: np.ndarray
    f0: float
    f0_next: float
    step_norm: float
    nu: float
    lambda_inf: float | None = None
    delta1: float | None = None
    delta2_max: float | None = None
    samples_cumulative: int = 0
    wall_time_ms: float = 0.0
    events: list[str] = field(default_factory=list)


@dataclass
class AdaptationState:
    smoothness: SmoothnessParams
    lambda_current: float
    lambda_updates: int = 0
    last_feasible_iterate: np.ndarray | None = None


def threshold_xi(eta: float, lam: float, mu: float, L, M, d: int) -> float:
    """Step threshold guaranteeing an eta-KKT output.

    ``min(eta / (60 Lambda sum M), eta / (12 mu), 1,
    eta / (4 Lambda (alpha_max + 2 L_max + 2 M_max)))`` with
    ``alpha_max = sqrt(d) M_max / 2``.
    """
    L = np.atleast_1d(np.asarray(L, dtype=float))
    M = np.atleast_1d(np.asarray(M, dtype=float))
    if eta <= 0 or lam <= 0 or mu <= 0 or d < 1 or np.any(L <= 0) or np.any(M <= 0):
        raise ValueError("threshold_xi arguments must be positive")
    alpha_max = math.sqrt(d) * M.max() / 2.0
    return min(
        eta / (60.0 * lam * M.sum()),
        eta / (12.0 * mu),
        1.0,
        eta / (4.0 * lam * (alpha_max + 2.0 * L.max() + 2.0 * M.max())),
    )


def iteration_bound(f0_x0: float, f0_inf: float, mu: float, h: float) -> float:
    """Upper bound ``(f0(x0) - inf f0) / (mu h^2)`` on the iterations before termination."""
    if f0_x0 < f0_inf:
        raise ValueError("f0_x0 must not be below f0_inf")
    if mu <= 0 or h <= 0:
        raise ValueError("mu and h must be positive")
    return (f0_x0 - f0_inf) / (mu * h * h)


def adapt_constants(state: AdaptationState, violation=None) -> AdaptationState:
    """Scale every L_i and M_i by the growth factor after an infeasible sample.

    ``violation`` (the offending constraint indices) is informational; the
    rule scales all constraints uniformly. The iterate to resume from is
    ``state.last_feasible_iterate``.
    """
    sp = state.smoothness
    grown = SmoothnessParams(
        sp.L * sp.growth_factor,
        sp.M * sp.growth_factor,
        sp.growth_factor,
        sp.infeasible_sample_count + 1,
    )
    if violation is not None:
        _log.info("infeasible sample on constraints %s; constants grown to L_max=%g M_max=%g",
                  list(np.atleast_1d(violation)), grown.L_max, grown.M_max)
    return replace(state, smoothness=grown)


def _resolve_xi(config: AlgorithmConfig, lam: float, sp: SmoothnessParams, d: int) -> float:
    if config.xi == "auto":
        return threshold_xi(config.eta, lam, config.mu, sp.L, sp.M, d)
    return float(config.xi)


def run(
    oracle: ProblemOracle,
    config: AlgorithmConfig,
    x0,
    smoothness: SmoothnessParams,
    callback: Callable[[IterationRecord], None] | None = None,
    time_limit: float | None = None,
) -> tuple[TerminationReport, list[IterationRecord]]:
    """Run the safe zeroth-order sequential QCQP method from ``x0``.

    ``oracle`` must have a known objective (apply ``epigraph_reformulate``
    first otherwise) and ``smoothness`` one entry per constraint. Returns the
    termination report and the per-iteration records. The report's
    ``residual`` is left empty: computing it needs ground truth.
    """
    objective = oracle.known_objective
    if objective is None:
        raise ValueError("the oracle's objective must be known; apply epigraph_reformulate first")
    if smoothness.m != oracle.n_constraints:
        raise ValueError(f"need {oracle.n_constraints} smoothness constants, got {smoothness.m}")
    d, m = oracle.dimension, oracle.n_constraints
    x = np.asarray(x0, dtype=float).ravel().copy()
    eta, mu = config.eta, config.mu
    t_start = time.perf_counter()
    oracle_t0 = oracle.oracle_seconds

    def elapsed_ms():
        return 1e3 * ((time.perf_counter() - t_start) - (oracle.oracle_seconds - oracle_t0))

    state = AdaptationState(
        SmoothnessParams(smoothness.L, smoothness.M, smoothness.growth_factor, smoothness.infeasible_sample_count),
        float(config.lambda_bound),
        0,
        x.copy(),
    )
    records: list[IterationRecord] = []

    def report(x_t, lam_t, k_t, reason, message=""):
        return TerminationReport(
            x_tilde=np.asarray(x_t, dtype=float),
            lambda_tilde=np.asarray(lam_t, dtype=float),
            k_tilde=k_t,
            reason=reason,
            lambda_bound=state.lambda_current,
            smoothness=state.smoothness,
            xi=xi,
            n_point_queries=oracle.n_point_queries,
            message=message,
            extra={"lambda_updates": state.lambda_updates},
        )

    xi = None
    oracle.tag = 0
    try:
        fx = oracle.query_all(x)
    except Exception as exc:  # noqa: BLE001 - any oracle failure aborts the run
        return report(x, np.zeros(m), 0, TerminationReason.ORACLE_ERROR, str(exc)), records
    if np.any(fx[1:] >= 0):
        raise StrictFeasibilityLost("the initial point must be strictly feasible")
    xi = _resolve_xi(config, state.lambda_current, state.smoothness, d)

    k = 0
    lam_warm = None
    lam_last = np.zeros(m)
    pending_events: list[str] = []
    while k < config.max_iterations:
        if time_limit is not None and time.perf_counter() - t_start > time_limit:
            break
        oracle.tag = k
        sp = state.smoothness
        events = pending_events
        pending_events = []
        l_star = safe_radius(fx[1:], sp.L_max)
        alpha_max = math.sqrt(d) * sp.M_max / 2.0
        nu = step_size(l_star, k, eta, alpha_max, m, state.lambda_current, d)
        if nu < NU_FLOOR * max(1.0, float(np.abs(x).max())):
            msg = f"probe spacing {nu:.3g} is below floating-point resolution at x_k"
            return report(x, lam_last, k, TerminationReason.ORACLE_ERROR, msg), records

        try:
            grads = estimate_gradients(oracle, x, fx, nu, sp.M)
        except InfeasibleSample as exc:
            state = adapt_constants(state, np.flatnonzero(exc.values[1:] > 0) + 1)
            xi = _resolve_xi(config, state.lambda_current, state.smoothness, d)
            pending_events = events + [EVENT_CONSTANTS]
            if not config.adapt_constants:
                return report(x, lam_last, k, TerminationReason.ORACLE_ERROR, str(exc)), records
            continue
        except Exception as exc:  # noqa: BLE001
            return report(x, lam_last, k, TerminationReason.ORACLE_ERROR, str(exc)), records

        safe = build_safe_set(x, fx[1:], grads, sp.M)
        if safe.clamped:
            events.append(EVENT_CLAMP)
        inst = Sp1Instance(objective, mu, safe)
        try:
            sol = solve_sp1(inst, config.sp1_tol, config.sp1_max_iter, warm=lam_warm)
        except NonConvergence as exc:
            sol = exc.solution
            events.append(EVENT_SP1)
        x_next = sol.x

        try:
            fx_next = oracle.query_all(x_next)
        except Exception as exc:  # noqa: BLE001
            return report(x, lam_last, k, TerminationReason.ORACLE_ERROR, str(exc)), records
        if np.any(fx_next[1:] >= 0):
            state = adapt_constants(state, np.flatnonzero(fx_next[1:] >= 0) + 1)
            xi = _resolve_xi(config, state.lambda_current, state.smoothness, d)
            pending_events = events + [EVENT_CONSTANTS]
            if not config.adapt_constants:
                return report(x, lam_last, k, TerminationReason.ORACLE_ERROR, "infeasible iterate"), records
            continue

        step = x_next - x
        step_norm = float(np.linalg.norm(step))
        rec = IterationRecord(k, x.copy(), x_next.copy(), float(fx[0]), float(fx_next[0]), step_norm, nu)
        lam_warm = sol.lam
        lam_last = sol.lam
        done = False
        if step_norm <= xi:
            inst2 = Sp2Instance(objective.gradient(x_next), step, safe.jacobian, fx[1:], sp.M, mu, eta)
            try:
                lam2, certified = solve_sp2(inst2, sol.lam, config.sp2_tol)
            except Sp2WarmStartInvalid as exc:
                _log.debug("iteration %d: %s", k, exc)
                events.append(EVENT_SP2)
            else:
                d1, d2 = inst2.deltas(lam2)
                lam_inf = float(lam2.max(initial=0.0))
                rec.lambda_inf, rec.delta1, rec.delta2_max = lam_inf, d1, float(d2.max(initial=0.0))
                lam_last = lam2
                if certified and lam_inf <= 2.0 * state.lambda_current:
                    done = True
                elif lam_inf > 2.0 * state.lambda_current and config.adapt_lambda:
                    state.lambda_current = config.kappa * lam_inf
                    state.lambda_updates += 1
                    xi = _resolve_xi(config, state.lambda_current, state.smoothness, d)
                    events.append(EVENT_LAMBDA)

        rec.events = events
        rec.samples_cumulative = oracle.n_point_queries
        rec.wall_time_ms = elapsed_ms()
        records.append(rec)
        if callback is not None:
            callback(rec)
        x, fx = x_next, fx_next
        state.last_feasible_iterate = x.copy()
        k += 1
        if done:
            return report(x_next, lam2, k, TerminationReason.BOTH_CONDITIONS_MET), records

    return report(x, lam_last, k, TerminationReason.MAX_ITERATIONS), records
