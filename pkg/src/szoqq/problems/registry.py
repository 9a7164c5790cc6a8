"""Name-based lookup of benchmark problems."""

from __future__ import annotations

from typing import Callable

from .base import Benchmark
from .control import ControlProblem
from .random_smooth import RandomSmoothInstance
from .toy import ToyProblem

REGISTRY: dict[str, Callable[..., Benchmark]] = {
    "toy": ToyProblem,
    "control": ControlProblem,
    "random": RandomSmoothInstance,
}


def get_problem(name: str, **params) -> Benchmark:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; available: {sorted(REGISTRY)}") from None
    return factory(**params)


def list_problems(registry: dict[str, Callable[..., Benchmark]] | None = None) -> list[str]:
    """One ``"name (d=.., m=..)"`` line per problem built with default parameters."""
    reg = REGISTRY if registry is None else registry
    return [factory().describe() for factory in reg.values()]
