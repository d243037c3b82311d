from __future__ import annotations

import math

from stratevo.archive import Archive, ArchiveEntry, Cost


def unit_vector(dim: int, axis: int) -> list[float]:
    v = [0.0] * dim
    v[axis % dim] = 1.0
    return v


def mixed_unit_vector(dim: int, seed: int) -> list[float]:
    """Distinct deterministic unit vector per seed (not axis-aligned)."""
    raw = [math.sin(0.7 * seed + 1.3 * j + 0.1) for j in range(dim)]
    norm = math.sqrt(sum(x * x for x in raw))
    return [x / norm for x in raw]


def make_entry(
    entry_id: int,
    fitness: float,
    *,
    dim: int = 4,
    parent_id: int | None = None,
    generation: int = 0,
    behavior: list[int] | None = None,
    description: str | None = None,
    program: str | None = None,
    produced_by: str = "strategy_pipeline",
    embedding: list[float] | None = None,
    cost: Cost | None = None,
) -> ArchiveEntry:
    return ArchiveEntry(
        id=entry_id,
        parent_id=parent_id,
        generation=generation,
        program_source=program or f"def f():\n    return {entry_id}\n",
        fitness=fitness,
        strategy_description=description or f"strategy for entry {entry_id}",
        strategy_embedding=embedding or mixed_unit_vector(dim, entry_id),
        behavior_vector=behavior,
        produced_by=produced_by,
        cost=cost or Cost(),
    )


def make_archive(
    fitnesses: list[float],
    capacity: int | None = None,
    behaviors: list[list[int]] | None = None,
    dim: int = 4,
) -> Archive:
    archive = Archive(capacity or max(2, len(fitnesses) + 4))
    for i, fitness in enumerate(fitnesses):
        behavior = behaviors[i] if behaviors is not None else None
        archive.insert(make_entry(i, fitness, dim=dim, behavior=behavior))
    return archive
