"""Shared evaluation result type."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class EvaluationResult:
    """Outcome of verifying one candidate.

    Exactly one of ``fitness`` and ``violation`` is set: a violated
    constraint (or failed/timed-out execution) never yields a score.
    """

    fitness: float | None = None
    behavior_vector: list[int] | None = None
    violation: str | None = None
    wall_s: float = 0.0
    stdout_excerpt: str = ""
    stderr_excerpt: str = ""

    @property
    def ok(self) -> bool:
        return self.fitness is not None

    def __post_init__(self) -> None:
        if (self.fitness is None) == (self.violation is None):
            raise ValueError(
                "exactly one of fitness and violation must be set "
                f"(fitness={self.fitness!r}, violation={self.violation!r})"
            )
