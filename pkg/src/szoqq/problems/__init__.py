from .base import Benchmark, PreparedRun, make_oracle, prepare_run
from .control import ControlProblem, Rollout
from .random_smooth import RandomSmoothInstance
from .registry import REGISTRY, get_problem, list_problems
from .toy import ToyProblem

__all__ = [
    "Benchmark",
    "ControlProblem",
    "PreparedRun",
    "REGISTRY",
    "RandomSmoothInstance",
    "Rollout",
    "ToyProblem",
    "get_problem",
    "list_problems",
    "make_oracle",
    "prepare_run",
]
