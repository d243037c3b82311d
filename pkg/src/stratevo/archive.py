"""Capacity-bounded archive of candidate programs and their strategy state.

Each entry carries the program source, its fitness, a persistent
natural-language strategy description, the description's unit-norm embedding,
and (for instance-based tasks) a per-instance success bit vector. The archive
is persisted as an append-only JSONL log whose records serialize in a fixed
field order so that replaying a log is byte-for-byte reproducible.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Iterator

EMBEDDING_NORM_TOL = 1e-6

PRODUCED_BY_VALUES = ("seed", "strategy_pipeline", "base_fallback")

_RECORD_FIELDS = (
    "id",
    "parent_id",
    "generation",
    "produced_by",
    "fitness",
    "strategy_description",
    "strategy_embedding",
    "behavior_vector",
    "program_source",
    "cost",
)


class ArchiveError(Exception):
    """Invalid entry or invalid mutation of the archive."""


class LogFormatError(Exception):
    """A run-log line that is not a well-formed record."""

    def __init__(self, line_no: int, reason: str) -> None:
        super().__init__(f"run log line {line_no}: {reason}")
        self.line_no = line_no


class TruncatedLogError(Exception):
    """A run log whose final line is incomplete; earlier lines are intact."""

    def __init__(self, path: str, salvageable_lines: int) -> None:
        super().__init__(
            f"run log {path} ends mid-record; first {salvageable_lines} "
            f"line(s) are salvageable"
        )
        self.salvageable_lines = salvageable_lines


@dataclass
class Cost:
    """Provider spend attributable to producing one entry."""

    usd: float = 0.0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    embedding_tokens: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "usd": self.usd,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "embedding_tokens": self.embedding_tokens,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Cost":
        return cls(
            usd=float(data["usd"]),
            prompt_tokens=int(data["prompt_tokens"]),
            completion_tokens=int(data["completion_tokens"]),
            embedding_tokens=int(data["embedding_tokens"]),
        )

    def add(self, other: "Cost") -> None:
        self.usd += other.usd
        self.prompt_tokens += other.prompt_tokens
        self.completion_tokens += other.completion_tokens
        self.embedding_tokens += other.embedding_tokens


@dataclass
class ArchiveEntry:
    """One candidate: program, score, and its strategy-space representation."""

    id: int
    parent_id: int | None
    generation: int
    program_source: str
    fitness: float
    strategy_description: str
    strategy_embedding: list[float]
    behavior_vector: list[int] | None = None
    produced_by: str = "strategy_pipeline"
    cost: Cost = field(default_factory=Cost)

    def validate(self) -> None:
        if self.id < 0:
            raise ArchiveError(f"entry id must be >= 0, got {self.id}")
        if self.generation < 0:
            raise ArchiveError(f"generation must be >= 0, got {self.generation}")
        if not math.isfinite(self.fitness):
            raise ArchiveError(f"entry {self.id}: fitness {self.fitness} is not finite")
        if not self.strategy_description:
            raise ArchiveError(f"entry {self.id}: strategy description is empty")
        if not self.strategy_embedding:
            raise ArchiveError(f"entry {self.id}: strategy embedding is empty")
        norm = math.sqrt(sum(x * x for x in self.strategy_embedding))
        if abs(norm - 1.0) > EMBEDDING_NORM_TOL:
            raise ArchiveError(
                f"entry {self.id}: embedding norm {norm!r} is not unit within "
                f"{EMBEDDING_NORM_TOL}"
            )
        if self.produced_by not in PRODUCED_BY_VALUES:
            raise ArchiveError(
                f"entry {self.id}: produced_by {self.produced_by!r} not one of "
                f"{PRODUCED_BY_VALUES}"
            )
        if self.behavior_vector is not None:
            if not all(b in (0, 1) for b in self.behavior_vector):
                raise ArchiveError(f"entry {self.id}: behavior vector must be 0/1 bits")

    def to_record(self) -> dict[str, Any]:
        """Canonical dict with fields in the fixed log order."""
        return {
            "id": self.id,
            "parent_id": self.parent_id,
            "generation": self.generation,
            "produced_by": self.produced_by,
            "fitness": self.fitness,
            "strategy_description": self.strategy_description,
            "strategy_embedding": list(self.strategy_embedding),
            "behavior_vector": (
                None if self.behavior_vector is None else list(self.behavior_vector)
            ),
            "program_source": self.program_source,
            "cost": self.cost.to_dict(),
        }

    @classmethod
    def from_record(cls, data: dict[str, Any]) -> "ArchiveEntry":
        missing = [k for k in _RECORD_FIELDS if k not in data]
        if missing:
            raise ArchiveError(f"record missing fields: {missing}")
        return cls(
            id=int(data["id"]),
            parent_id=None if data["parent_id"] is None else int(data["parent_id"]),
            generation=int(data["generation"]),
            produced_by=str(data["produced_by"]),
            fitness=float(data["fitness"]),
            strategy_description=str(data["strategy_description"]),
            strategy_embedding=[float(x) for x in data["strategy_embedding"]],
            behavior_vector=(
                None
                if data["behavior_vector"] is None
                else [int(b) for b in data["behavior_vector"]]
            ),
            program_source=str(data["program_source"]),
            cost=Cost.from_dict(data["cost"]),
        )


def canonical_record(entry: ArchiveEntry) -> str:
    """One-line JSON with fixed key order and shortest round-trip floats."""
    return json.dumps(entry.to_record(), separators=(",", ":"), ensure_ascii=False)


class Archive:
    """Live entry set under a fixed capacity, tracking the run-wide best.

    Eviction removes the lowest-fitness live entry, excluding both the
    incoming entry and the global best (which is never evicted); ties break
    toward the oldest id. Entry ids must be unique and strictly increasing.
    """

    def __init__(self, capacity: int) -> None:
        if capacity < 2:
            raise ArchiveError(f"capacity must be >= 2, got {capacity}")
        self.capacity = capacity
        self._entries: dict[int, ArchiveEntry] = {}
        self.best_id: int | None = None
        self._last_id: int | None = None
        self._embedding_dim: int | None = None
        self._behavior_length: int | None = None

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, entry_id: int) -> bool:
        return entry_id in self._entries

    def __iter__(self) -> Iterator[ArchiveEntry]:
        return iter(self._entries.values())

    def live(self) -> list[ArchiveEntry]:
        """Live entries in increasing id order."""
        return list(self._entries.values())

    def get(self, entry_id: int) -> ArchiveEntry:
        return self._entries[entry_id]

    @property
    def embedding_dim(self) -> int | None:
        return self._embedding_dim

    def insert(self, entry: ArchiveEntry) -> None:
        entry.validate()
        if self._last_id is not None and entry.id <= self._last_id:
            raise ArchiveError(
                f"entry id {entry.id} is not greater than the last inserted id "
                f"{self._last_id}"
            )
        if self._embedding_dim is None:
            self._embedding_dim = len(entry.strategy_embedding)
        elif len(entry.strategy_embedding) != self._embedding_dim:
            raise ArchiveError(
                f"entry {entry.id}: embedding dimension "
                f"{len(entry.strategy_embedding)} != archive dimension "
                f"{self._embedding_dim}"
            )
        if entry.behavior_vector is not None:
            if self._behavior_length is None:
                self._behavior_length = len(entry.behavior_vector)
            elif len(entry.behavior_vector) != self._behavior_length:
                raise ArchiveError(
                    f"entry {entry.id}: behavior vector length "
                    f"{len(entry.behavior_vector)} != task length "
                    f"{self._behavior_length}"
                )

        self._entries[entry.id] = entry
        self._last_id = entry.id
        if self.best_id is None or entry.fitness > self._entries[self.best_id].fitness:
            self.best_id = entry.id

        if len(self._entries) > self.capacity:
            victims = [
                e
                for e in self._entries.values()
                if e.id != self.best_id and e.id != entry.id
            ]
            victim = min(victims, key=lambda e: (e.fitness, e.id))
            del self._entries[victim.id]

    def best(self) -> ArchiveEntry:
        if self.best_id is None:
            raise ArchiveError("archive is empty")
        return self._entries[self.best_id]


def append_log(entry: ArchiveEntry, path: str | os.PathLike[str]) -> None:
    """Append one canonical record line to the run log."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(canonical_record(entry) + "\n")


def iter_log(path: str | os.PathLike[str]) -> Iterator[ArchiveEntry]:
    """Yield all entries from a run log, in insertion order.

    A malformed non-final line aborts with its line number; a malformed final
    line (crashed writer) raises :class:`TruncatedLogError` naming how many
    leading lines are intact.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for i, line in enumerate(lines):
        is_final = i == len(lines) - 1
        try:
            data = json.loads(line)
            entry = ArchiveEntry.from_record(data)
        except (json.JSONDecodeError, ArchiveError, KeyError, TypeError, ValueError) as exc:
            if is_final:
                raise TruncatedLogError(os.fspath(path), i) from exc
            raise LogFormatError(i + 1, str(exc)) from exc
        yield entry


def load_run(path: str | os.PathLike[str], capacity: int | None = None) -> Archive:
    """Rebuild an archive by replaying a run log through ``insert``.

    When ``capacity`` is omitted it is read from the ``header.json`` sidecar
    next to the log. Replay applies the same eviction policy as the live run,
    so the reconstructed live set and best id are identical.
    """
    if capacity is None:
        header_path = os.path.join(os.path.dirname(os.fspath(path)), "header.json")
        with open(header_path, "r", encoding="utf-8") as fh:
            header = json.load(fh)
        capacity = int(header["config"]["capacity"])
    archive = Archive(capacity)
    for entry in iter_log(path):
        archive.insert(entry)
    return archive


def canonical_dump(archive: Archive) -> bytes:
    """Byte-stable serialization of the live state, for replay-identity checks."""
    lines = [canonical_record(e) for e in archive.live()]
    lines.append(
        json.dumps(
            {"capacity": archive.capacity, "best_id": archive.best_id},
            separators=(",", ":"),
        )
    )
    return ("\n".join(lines) + "\n").encode("utf-8")
