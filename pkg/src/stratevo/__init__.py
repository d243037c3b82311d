"""Evolutionary program search over a dual archive of programs and the
natural-language strategies they implement."""

from .archive import Archive, ArchiveEntry, Cost
from .config import ConfigError, ProvidersConfig, RunConfig
from .engine import RunResult, resume_run, run
from .navigation import LandscapeGuidance
from .strategy_space import ClusterState, InspirationSet
from .tasks import EvaluationResult, Task, build_task

__version__ = "0.1.0"

__all__ = [
    "Archive",
    "ArchiveEntry",
    "ClusterState",
    "ConfigError",
    "Cost",
    "EvaluationResult",
    "InspirationSet",
    "LandscapeGuidance",
    "ProvidersConfig",
    "RunConfig",
    "RunResult",
    "Task",
    "build_task",
    "resume_run",
    "run",
    "__version__",
]
