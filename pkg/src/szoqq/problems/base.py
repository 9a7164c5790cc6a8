from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    EpigraphOracle,
    EpigraphTruth,
    KnownObjective,
    ProblemOracle,
    SmoothnessParams,
    epigraph_reformulate,
)


class Benchmark:
    """A test problem with hidden ground truth.

    Subclasses implement ``objective``, ``constraints`` and their gradients.
    The solver only ever receives ``make_oracle()``; the gradient methods are
    for verification.
    """

    name = "benchmark"
    dimension: int
    n_constraints: int
    x0: np.ndarray
    known_objective: KnownObjective | None = None

    def objective(self, x) -> float:
        raise NotImplementedError

    def objective_gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def constraints(self, x) -> np.ndarray:
        raise NotImplementedError

    def constraint_jacobian(self, x) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.append(self.objective(x), self.constraints(x))

    def make_oracle(self) -> ProblemOracle:
        return ProblemOracle(
            self.dimension,
            self.n_constraints,
            self.evaluate,
            known_objective=self.known_objective,
            concurrent_queries=True,
        )

    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        return f"{self.name} (d={self.dimension}, m={self.n_constraints})"


@dataclass
class PreparedRun:
    """Everything the driver needs, in the solver's (possibly lifted) space."""

    oracle: ProblemOracle
    x0: np.ndarray
    smoothness: SmoothnessParams
    truth: object
    lifted: bool


def make_oracle(problem: Benchmark) -> ProblemOracle:
    return problem.make_oracle()


def prepare_run(
    problem: Benchmark,
    smoothness: SmoothnessParams,
    objective_constants: tuple[float, float] | None = None,
    margin: float = 1.0,
) -> PreparedRun:
    """Build the solver-side oracle, lifting unknown objectives to an epigraph.

    ``objective_constants`` are the (L0, M0) of f_0, required only when the
    objective is unknown.
    """
    oracle = problem.make_oracle()
    if oracle.known_objective is not None:
        return PreparedRun(oracle, np.asarray(problem.x0, dtype=float), smoothness, problem, False)
    if objective_constants is None:
        raise ValueError(f"problem {problem.name!r} has an unknown objective; give its (L0, M0)")
    lifted = epigraph_reformulate(oracle, *objective_constants)
    assert isinstance(lifted, EpigraphOracle)
    z0 = lifted.lift(problem.x0, margin)
    return PreparedRun(lifted, z0, lifted.lift_smoothness(smoothness), EpigraphTruth(problem), True)
