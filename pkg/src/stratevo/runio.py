"""Run-directory layout and append-only log writers.

A run directory holds:

- ``header.json``      config (fully defaulted) + its hash, written once
- ``archive.jsonl``    one record per inserted entry, append-only
- ``trajectory.csv``   one row per generation (plus the seed row)
- ``guidance.jsonl``   every successful landscape refresh
- ``transcript.jsonl`` every provider exchange, with usage and cost
- ``state.json``       resume cursor, rewritten atomically each generation
- ``summary.json``     end-of-run digest
- ``.lock``            single-process guard

Everything except ``state.json``, ``summary.json`` and the transcript (which
records latency) is deterministic for a fixed config, seed, and provider
behavior, which is what makes log hashes comparable across reruns/resumes.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any

from .archive import ArchiveEntry, append_log
from .navigation import LandscapeGuidance

TRAJECTORY_HEADER = "generation,fitness,best_so_far,cumulative_cost_usd,route,guidance_gen"


class RunDirError(Exception):
    """Refused or inconsistent run-directory operation."""


class RunLocked(RunDirError):
    """Another process holds the run directory."""


def config_hash(config_dict: dict[str, Any]) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _fmt(value: float | int | None) -> str:
    return "" if value is None else repr(value) if isinstance(value, float) else str(value)


@dataclass
class TrajectoryRow:
    generation: int
    fitness: float | None
    best_so_far: float
    cumulative_cost_usd: float
    route: str
    guidance_gen: int | None

    def to_csv(self) -> str:
        return ",".join(
            [
                str(self.generation),
                _fmt(self.fitness),
                _fmt(self.best_so_far),
                _fmt(self.cumulative_cost_usd),
                self.route,
                _fmt(self.guidance_gen),
            ]
        )

    @classmethod
    def from_csv(cls, line: str) -> "TrajectoryRow":
        parts = line.split(",")
        return cls(
            generation=int(parts[0]),
            fitness=float(parts[1]) if parts[1] else None,
            best_so_far=float(parts[2]),
            cumulative_cost_usd=float(parts[3]),
            route=parts[4],
            guidance_gen=int(parts[5]) if parts[5] else None,
        )


@dataclass
class TranscriptRecord:
    """One provider exchange as written to the transcript log."""

    index: int
    generation: int
    kind: str  # "chat" | "embed"
    purpose: str  # "sa" | "sln" | "base" | "describe" | "embed"
    model: str
    prompt_tokens: int
    completion_tokens: int
    cost_usd: float
    latency_s: float
    request_system: str = ""
    request_user: str = ""
    response_text: str = ""
    input_text: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "generation": self.generation,
            "kind": self.kind,
            "purpose": self.purpose,
            "model": self.model,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "cost_usd": self.cost_usd,
            "latency_s": self.latency_s,
            "request_system": self.request_system,
            "request_user": self.request_user,
            "response_text": self.response_text,
            "input_text": self.input_text,
        }


class RunDirectory:
    """Paths plus append/read helpers for one run."""

    def __init__(self, path: str) -> None:
        self.path = path
        self.header_path = os.path.join(path, "header.json")
        self.archive_path = os.path.join(path, "archive.jsonl")
        self.trajectory_path = os.path.join(path, "trajectory.csv")
        self.guidance_path = os.path.join(path, "guidance.jsonl")
        self.transcript_path = os.path.join(path, "transcript.jsonl")
        self.state_path = os.path.join(path, "state.json")
        self.summary_path = os.path.join(path, "summary.json")
        self.lock_path = os.path.join(path, ".lock")

    @classmethod
    def create(cls, path: str, config_dict: dict[str, Any]) -> "RunDirectory":
        """Initialize a fresh run directory; refuses to reuse one."""
        rundir = cls(path)
        if os.path.exists(rundir.header_path):
            raise RunDirError(
                f"run directory {path} already contains a run; "
                "use resume instead of overwriting"
            )
        os.makedirs(path, exist_ok=True)
        header = {"config": config_dict, "config_hash": config_hash(config_dict)}
        with open(rundir.header_path, "w", encoding="utf-8") as fh:
            json.dump(header, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(rundir.trajectory_path, "w", encoding="utf-8") as fh:
            fh.write(TRAJECTORY_HEADER + "\n")
        return rundir

    @classmethod
    def open_existing(cls, path: str) -> "RunDirectory":
        rundir = cls(path)
        if not os.path.exists(rundir.header_path):
            raise RunDirError(f"{path} is not a run directory (no header.json)")
        return rundir

    def read_header(self) -> dict[str, Any]:
        with open(self.header_path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def verify_header(self) -> dict[str, Any]:
        """Header config, after checking it still matches its recorded hash."""
        header = self.read_header()
        actual = config_hash(header["config"])
        if actual != header.get("config_hash"):
            raise RunDirError(
                f"config hash mismatch in {self.header_path}: header was "
                "edited after the run started"
            )
        return header

    def acquire_lock(self) -> None:
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunLocked(
                f"{self.path} is locked by another process "
                f"(remove {self.lock_path} if that process is gone)"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))

    def release_lock(self) -> None:
        try:
            os.unlink(self.lock_path)
        except FileNotFoundError:
            pass

    def append_entry(self, entry: ArchiveEntry) -> None:
        append_log(entry, self.archive_path)

    def append_trajectory(self, row: TrajectoryRow) -> None:
        with open(self.trajectory_path, "a", encoding="utf-8") as fh:
            fh.write(row.to_csv() + "\n")

    def read_trajectory(self) -> list[TrajectoryRow]:
        with open(self.trajectory_path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        return [TrajectoryRow.from_csv(line) for line in lines[1:] if line]

    def append_guidance(self, guidance: LandscapeGuidance) -> None:
        with open(self.guidance_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(guidance.to_dict(), separators=(",", ":")) + "\n")

    def read_guidance_log(self) -> list[LandscapeGuidance]:
        if not os.path.exists(self.guidance_path):
            return []
        out = []
        with open(self.guidance_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    out.append(LandscapeGuidance.from_dict(json.loads(line)))
        return out

    def append_transcript(self, record: TranscriptRecord) -> None:
        with open(self.transcript_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")

    def read_transcript(self) -> list[dict[str, Any]]:
        if not os.path.exists(self.transcript_path):
            return []
        with open(self.transcript_path, "r", encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def write_state(self, state: dict[str, Any]) -> None:
        tmp = self.state_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.state_path)

    def read_state(self) -> dict[str, Any]:
        with open(self.state_path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def write_summary(self, summary: dict[str, Any]) -> None:
        with open(self.summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
