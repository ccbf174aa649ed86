"""Multi-agent routing with task time costs: problem model, exact oracle, heuristics and an attention policy."""
from .core import Plan, Point2D, Scenario, Task, count_solutions, mission_times, validate_plan
from .generate import GeneratorConfig, generate, generate_batch

__version__ = "0.1.0"

__all__ = [
    "GeneratorConfig",
    "Plan",
    "Point2D",
    "Scenario",
    "Task",
    "count_solutions",
    "generate",
    "generate_batch",
    "mission_times",
    "validate_plan",
]
