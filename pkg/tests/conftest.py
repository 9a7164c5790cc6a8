import numpy as np
import pytest

from szoqq.core import AlgorithmConfig, KnownObjective, ProblemOracle, SmoothnessParams
from szoqq.driver import run
from szoqq.feasible_set import build_safe_set
from szoqq.gradient import GradientEstimate
from szoqq.problems import ToyProblem

TOY_CONFIG = dict(mu=1e-3, eta=1e-2, lambda_bound=1.5)


def make_set(anchor, fvals, G, M):
    """Safe set from exact gradient rows (error bound zero)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    ests = [GradientEstimate(g.copy(), 1.0, 0.0, 0) for g in G]
    return build_safe_set(anchor, fvals, ests, M)


def quadratic_oracle(Q, b, c0=0.0):
    """Oracle with f_0 = 0 (known) and one constraint x^T Q x + b^T x + c0."""
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b.size

    def evaluate(x):
        return np.array([0.0, float(x @ Q @ x + b @ x + c0)])

    return ProblemOracle(d, 1, evaluate, known_objective=KnownObjective(np.zeros(d)))


@pytest.fixture(scope="session")
def toy_run():
    p = ToyProblem()
    oracle = p.make_oracle()
    report, records = run(oracle, AlgorithmConfig(**TOY_CONFIG), p.x0, SmoothnessParams.uniform(3, 5, 3))
    return p, oracle, report, records


@pytest.fixture(scope="session")
def toy_adaptation_run():
    p = ToyProblem()
    oracle = p.make_oracle()
    report, records = run(
        oracle, AlgorithmConfig(**TOY_CONFIG, max_iterations=3000), p.x0, SmoothnessParams.uniform(3, 0.2, 0.2)
    )
    return p, oracle, report, records


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
