"""Event-triggered multi-task navigation with certified distributed state estimation."""

from .errors import AssumptionViolated, MaxTicksExceeded, SwitchnavError
from .episode import monte_carlo, run_episode
from .scenario import build_scenario, load_document, load_scenario

__all__ = [
    "AssumptionViolated",
    "MaxTicksExceeded",
    "SwitchnavError",
    "build_scenario",
    "load_document",
    "load_scenario",
    "monte_carlo",
    "run_episode",
]
