import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from szoqq.core import EpigraphTruth, KnownObjective, ProblemOracle, SmoothnessParams, StrictFeasibilityLost
from szoqq.feasible_set import (
    Ball,
    ball_containment,
    build_safe_set,
    contains,
    lipschitz_set,
    quadratic_ball,
    sample_in_set,
)
from szoqq.gradient import estimate_gradients, safe_radius
from szoqq.problems import ControlProblem, RandomSmoothInstance, ToyProblem, prepare_run

from conftest import make_set


def initial_safe_set(oracle, x0, smoothness):
    """S^(0) exactly as the driver builds it at k = 0."""
    fx = oracle.query_all(x0)
    l_star = safe_radius(fx[1:], smoothness.L_max)
    nu = l_star / math.sqrt(oracle.dimension)
    grads = estimate_gradients(oracle, x0, fx, nu, smoothness.M)
    return build_safe_set(x0, fx[1:], grads, smoothness.M)


class TestBallFormulas:
    def test_zero_gradient(self):
        ball, clamped = quadratic_ball(np.zeros(3), -1.0, np.zeros(3), 2.0)
        assert not clamped
        assert np.array_equal(ball.center, np.zeros(3))
        assert ball.radius == pytest.approx(math.sqrt(0.5))

    def test_toy_second_constraint(self):
        ball, _ = quadratic_ball(np.array([0.9, 0.9]), -0.1, np.array([0.0, 1.0]), 3.0)
        assert np.allclose(ball.center, [0.9, 0.9 - 1 / 6])
        assert ball.radius**2 == pytest.approx(0.1 / 3 + 1 / 36)
        assert ball.radius == pytest.approx(0.24721, abs=1e-5)

    def test_safe_set_uses_doubled_curvature(self):
        s = make_set(np.zeros(2), [-1.0], [[0.0, 0.0]], [1.0])
        assert s.balls[0].radius == pytest.approx(math.sqrt(0.5))

    def test_clamp(self):
        ball, clamped = quadratic_ball(np.zeros(2), 1.0, np.zeros(2), 1.0)
        assert clamped and ball.radius == pytest.approx(1e-12)

    def test_nonpositive_curvature(self):
        with pytest.raises(ValueError):
            quadratic_ball(np.zeros(1), -1.0, np.zeros(1), 0.0)


class TestLipschitzSet:
    def test_examples(self):
        s = lipschitz_set(np.zeros(2), [-1.0], [5.0])
        assert s.balls[0].radius == pytest.approx(0.2)
        s = lipschitz_set(np.zeros(2), [-0.1, -0.55, -0.09], 5.0)
        assert [b.radius for b in s.balls] == pytest.approx([0.02, 0.11, 0.018])

    def test_collapse(self):
        s = lipschitz_set(np.ones(2), [-1e-14], [1.0])
        assert s.balls[0].radius == pytest.approx(1e-14)

    def test_requires_strict_feasibility(self):
        with pytest.raises(StrictFeasibilityLost):
            lipschitz_set(np.zeros(2), [-1.0, 0.0], 1.0)
        with pytest.raises(StrictFeasibilityLost):
            make_set(np.zeros(1), [0.0], [[1.0]], [1.0])


class TestMembership:
    def test_anchor_and_outside(self):
        s = make_set(np.zeros(2), [-1.0, -0.2], [[1.0, 0.0], [0.0, -1.0]], [1.0, 2.0])
        assert contains(s, np.zeros(2))
        b = s.balls[1]
        far = b.center + np.array([b.radius + 1e-6, 0.0])
        assert not contains(s, far)

    def test_closed_ball(self):
        assert Ball(np.zeros(2), 1.0).contains(np.array([1.0, 0.0]))

    def test_dimension_mismatch(self):
        s = make_set(np.zeros(2), [-1.0], [[0.0, 0.0]], [1.0])
        with pytest.raises(ValueError):
            contains(s, np.zeros(3))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000))
    def test_anchor_strictly_inside_and_models_nonpositive(self, d, m, seed):
        rng = np.random.default_rng(seed)
        anchor = rng.normal(size=d)
        fvals = -rng.uniform(0.01, 2.0, size=m)
        G = rng.normal(size=(m, d))
        M = rng.uniform(0.1, 5.0, size=m)
        s = make_set(anchor, fvals, G, M)
        for b in s.balls:
            assert np.linalg.norm(anchor - b.center) < b.radius
        pts = sample_in_set(s, 200, rng)
        for p in pts:
            assert np.all(s.model_values(p) <= 1e-9)


class TestBallContainment:
    def test_examples(self):
        assert ball_containment(Ball(np.zeros(2), 1.0), Ball(np.zeros(2), 1.0))
        assert ball_containment(Ball(np.zeros(2), 0.2), Ball(np.zeros(2), 1.0))
        assert not ball_containment(Ball(np.array([0.6, 0.0]), 0.5), Ball(np.zeros(2), 1.0))


def _safe_set_cases():
    toy = ToyProblem()
    yield "toy", toy.make_oracle(), toy.x0, SmoothnessParams.uniform(3, 5, 3), toy
    lifted_toy = prepare_run(ToyProblem(objective_known=False), SmoothnessParams.uniform(3, 5, 3), (5, 3), 0.1)
    yield "toy-epigraph", lifted_toy.oracle, lifted_toy.x0, lifted_toy.smoothness, lifted_toy.truth
    for seed in range(5):
        p = RandomSmoothInstance(seed, d=3 + seed % 3, m=2 + seed % 3)
        yield f"random-{seed}", p.make_oracle(), p.x0, p.smoothness(), p
    ctrl = prepare_run(ControlProblem(), SmoothnessParams.uniform(48, 20, 20), (20, 20), 0.1)
    yield "control", ctrl.oracle, ctrl.x0, ctrl.smoothness, ctrl.truth


@pytest.mark.parametrize("case", list(_safe_set_cases()), ids=lambda c: c[0])
def test_safe_set_samples_are_feasible(case):
    """10^4 uniform points of S^(0) are strictly feasible under ground truth."""
    _, oracle, x0, smoothness, truth = case
    s = initial_safe_set(oracle, x0, smoothness)
    pts = sample_in_set(s, 10_000, np.random.default_rng(0))
    worst = max(float(np.max(truth.constraints(p))) for p in pts)
    assert worst < 0


def _near_boundary_instance(rng):
    """f_i(x) = w_i^T x + eps_i sin(v_i^T x) - c_i with exact gradient/Hessian bounds."""
    d = int(rng.integers(1, 5))
    m = int(rng.integers(1, 4))
    W = rng.normal(size=(m, d))
    V = rng.normal(size=(m, d))
    eps = rng.uniform(0.05, 0.5, size=m)
    L_inf = np.linalg.norm(W, axis=1) + eps * np.linalg.norm(V, axis=1)
    M_inf = eps * np.linalg.norm(V, axis=1) ** 2
    L = float(L_inf.max()) * rng.uniform(1.2, 2.0)
    M = float(M_inf.max()) * rng.uniform(1.0, 1.5)
    ell_min = float(np.min(L - L_inf))
    x0 = rng.normal(size=d)
    slack = rng.uniform(0.05, 1.0, size=m) * L * ell_min / (4 * M)
    c = W @ x0 + eps * np.sin(V @ x0) + slack

    def evaluate(x):
        return np.append(0.0, W @ x + eps * np.sin(V @ x) - c)

    oracle = ProblemOracle(d, m, evaluate, known_objective=KnownObjective(np.zeros(d)))
    return oracle, x0, SmoothnessParams.uniform(m, L, M), ell_min


def test_lipschitz_set_inside_safe_set_near_boundary():
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(20):
        oracle, x0, sp, ell_min = _near_boundary_instance(rng)
        fx = oracle.query_all(x0)[1:]
        assert np.min(-fx) <= sp.L_max * ell_min / (4 * sp.M_max)
        S = initial_safe_set(oracle, x0, sp)
        T = lipschitz_set(x0, fx, sp.L)
        inner = min(T.balls, key=lambda b: b.radius)
        violations += sum(not ball_containment(inner, outer) for outer in S.balls)
    assert violations == 0
