"""Task definitions and the candidate-execution bridge.

A task bundles the prompt-facing brief, a seed program, and an in-process
verifier for the data a candidate emits over the JSON-on-stdout protocol.
Execution itself is pluggable: the subprocess executor launches the runner
shim so evolved code runs isolated with a wall-clock timeout, while the
in-process executor exists for desk-scale runs and tests with trusted
fixture programs.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
import time
import traceback
from dataclasses import dataclass, field
from typing import Callable

from .geometry import (
    DEFAULT_TOL,
    Placement,
    verify_minmax,
    verify_rect_packing,
    verify_square_packing,
)
from .results import EvaluationResult
from .sequences import (
    DEFAULT_INSTANCE_COUNT,
    DEFAULT_INSTANCE_SEED,
    make_instances,
    oracle_answer,
    score_answers,
)

__all__ = [
    "EvaluationResult",
    "Placement",
    "Task",
    "TaskError",
    "RawExecution",
    "build_task",
    "execute_candidate",
    "default_runner_cmd",
    "SubprocessExecutor",
    "InProcessExecutor",
    "verify_square_packing",
    "verify_rect_packing",
    "verify_minmax",
    "make_instances",
    "oracle_answer",
    "score_answers",
    "DEFAULT_TOL",
]

EXCERPT_LIMIT = 2000

SQUARE_PACKING = "square_packing"
RECT_PACKING = "rect_packing"
MINMAX = "minmax"
INT_SEQUENCES = "int_sequences"

ENTRY_FUNCTIONS = {
    SQUARE_PACKING: "construct_packing",
    RECT_PACKING: "construct_packing",
    MINMAX: "construct_points",
    INT_SEQUENCES: "solve",
}


class TaskError(Exception):
    """Unknown task id or invalid task parameters."""


@dataclass
class RawExecution:
    """What came back from running a candidate, before verification."""

    status: str  # "ok" | "timeout" | "error"
    payload: dict | None = None
    exit_code: int | None = None
    stdout: str = ""
    stderr: str = ""
    wall_s: float = 0.0


@dataclass
class Task:
    """One optimization task: brief, verifier, seed program, reference line."""

    task_id: str
    brief: str
    system_prompt: str
    seed_program: str
    reference: float | None
    verify_payload_fn: Callable[[dict], EvaluationResult]
    instances: list[dict] | None = None
    params: dict = field(default_factory=dict)

    @property
    def entry_function(self) -> str:
        return ENTRY_FUNCTIONS[self.task_id]

    def verify_payload(self, payload: dict) -> EvaluationResult:
        return self.verify_payload_fn(payload)

    def evaluate(
        self,
        program: str,
        executor: "Callable[[str, Task, float], RawExecution]",
        timeout_s: float = 20.0,
    ) -> EvaluationResult:
        """Run the candidate through an executor and verify its output."""
        raw = executor(program, self, timeout_s)
        if raw.status == "timeout":
            result = EvaluationResult(
                fitness=None, violation=f"execution timed out after {timeout_s}s"
            )
        elif raw.status == "error":
            result = EvaluationResult(
                fitness=None,
                violation=f"candidate execution failed (exit {raw.exit_code})",
            )
        else:
            try:
                result = self.verify_payload(raw.payload or {})
            except (KeyError, TypeError, ValueError) as exc:
                result = EvaluationResult(
                    fitness=None, violation=f"malformed result payload: {exc}"
                )
        result.wall_s = raw.wall_s
        result.stdout_excerpt = raw.stdout[:EXCERPT_LIMIT]
        result.stderr_excerpt = raw.stderr[:EXCERPT_LIMIT]
        return result


def _circles_from(data: dict) -> list[tuple[float, float, float]]:
    return [(float(x), float(y), float(r)) for x, y, r in data["circles"]]


def _square_verifier(n: int, tol: float) -> Callable[[dict], EvaluationResult]:
    def verify(payload: dict) -> EvaluationResult:
        data = payload["placement"]
        return verify_square_packing(Placement(circles=_circles_from(data)), n, tol)

    return verify


def _rect_verifier(n: int, tol: float) -> Callable[[dict], EvaluationResult]:
    def verify(payload: dict) -> EvaluationResult:
        data = payload["placement"]
        width = data.get("width")
        return verify_rect_packing(
            Placement(
                circles=_circles_from(data),
                width=None if width is None else float(width),
            ),
            n,
            tol,
        )

    return verify


def _minmax_verifier(n: int, tol: float) -> Callable[[dict], EvaluationResult]:
    def verify(payload: dict) -> EvaluationResult:
        data = payload["placement"]
        points = [(float(x), float(y)) for x, y in data["points"]]
        return verify_minmax(Placement(points=points), n, tol)

    return verify


_SQUARE_SEED = '''\
def construct_packing():
    """Safe starting grid: 26 small circles, nowhere near optimal."""
    circles = []
    for row in range(5):
        for col in range(6):
            if len(circles) < 26:
                circles.append((0.1 + 0.15 * col, 0.1 + 0.2 * row, 0.05))
    return circles
'''

_RECT_SEED = '''\
def construct_packing():
    """Safe starting grid in a 1.2 x 0.8 rectangle."""
    width = 1.2
    circles = []
    for row in range(3):
        for col in range(7):
            circles.append((0.1 + 0.16 * col, 0.15 + 0.25 * row, 0.05))
    return (width, circles)
'''

_MINMAX_SEED = '''\
def construct_points():
    """Plain 4x4 lattice."""
    return [(i / 3.0, j / 3.0) for i in range(4) for j in range(4)]
'''

_SEQUENCES_SEED = '''\
def solve(instance):
    """Linear extrapolation; only exact on arithmetic sequences."""
    terms = instance["terms"]
    return 2 * terms[-1] - terms[-2]
'''

MINMAX_REFERENCE = 1.0 / 12.889266112**0.5


def build_task(task_id: str, params: dict | None = None) -> Task:
    """Instantiate a task by id, applying parameter overrides (test hooks
    like smaller n included)."""
    params = dict(params or {})
    tol = float(params.get("tol", DEFAULT_TOL))
    seed_override = params.pop("seed_program", None)
    if task_id == SQUARE_PACKING:
        n = int(params.get("n", 26))
        return Task(
            task_id=task_id,
            brief=(
                f"Pack exactly {n} non-overlapping circles inside the unit "
                "square [0,1]x[0,1], maximizing the sum of their radii. "
                "Circles may touch but must not overlap, and must stay fully "
                "inside the square. Published reference for n=26: sum of "
                "radii 2.635. Write a Python function construct_packing() "
                "returning a list of (x, y, r) triples, one per circle."
            ),
            system_prompt=(
                "You are an expert in computational geometry and circle "
                "packing. You design explicit constructor functions."
            ),
            seed_program=seed_override or _SQUARE_SEED,
            reference=2.635,
            verify_payload_fn=_square_verifier(n, tol),
            params={"n": n, "tol": tol},
        )
    if task_id == RECT_PACKING:
        n = int(params.get("n", 21))
        return Task(
            task_id=task_id,
            brief=(
                f"Pack exactly {n} non-overlapping circles inside a rectangle "
                "of perimeter 4: you choose the width w (0 < w < 2) and the "
                "height is 2 - w. Maximize the sum of the radii. Published "
                "reference for n=21: 2.3658321334167627. Write a Python "
                "function construct_packing() returning a pair (w, circles) "
                "where circles is a list of (x, y, r) triples."
            ),
            system_prompt=(
                "You are an expert in computational geometry and circle "
                "packing. You design explicit constructor functions."
            ),
            seed_program=seed_override or _RECT_SEED,
            reference=2.3658321334167627,
            verify_payload_fn=_rect_verifier(n, tol),
            params={"n": n, "tol": tol},
        )
    if task_id == MINMAX:
        n = int(params.get("n", 16))
        return Task(
            task_id=task_id,
            brief=(
                f"Place exactly {n} points inside the unit square "
                "[0,1]x[0,1], maximizing the ratio of the minimum to the "
                "maximum pairwise Euclidean distance. Published reference "
                "for n=16: about 0.2786. Write a Python function "
                "construct_points() returning a list of (x, y) pairs."
            ),
            system_prompt=(
                "You are an expert in computational geometry and point "
                "dispersion problems."
            ),
            seed_program=seed_override or _MINMAX_SEED,
            reference=MINMAX_REFERENCE,
            verify_payload_fn=_minmax_verifier(n, tol),
            params={"n": n, "tol": tol},
        )
    if task_id == INT_SEQUENCES:
        count = int(params.get("count", DEFAULT_INSTANCE_COUNT))
        seed = int(params.get("seed", DEFAULT_INSTANCE_SEED))
        instances = make_instances(count, seed)

        def verify(payload: dict) -> EvaluationResult:
            return score_answers(list(payload["answers"]), instances)

        return Task(
            task_id=task_id,
            brief=(
                "Infer the rule of integer sequences. Each instance is a "
                "dict {'terms': [five integers]} listing the first five "
                "terms of a sequence whose second difference is constant "
                "(plain arithmetic sequences included). Write a Python "
                f"function solve(instance) returning the sixth term as an "
                f"int. Fitness is the fraction of the {count} fixed "
                "validation instances answered exactly."
            ),
            system_prompt=(
                "You are an expert at inferring the generating rules of "
                "integer sequences."
            ),
            seed_program=seed_override or _SEQUENCES_SEED,
            reference=1.0,
            verify_payload_fn=verify,
            instances=instances,
            params={"count": count, "seed": seed},
        )
    raise TaskError(f"unknown task id {task_id!r}")


def default_runner_cmd() -> list[str]:
    return [sys.executable, "-m", "candidate_runner"]


def execute_candidate(
    program: str,
    task: Task,
    timeout_s: float,
    runner_cmd: list[str] | None = None,
) -> RawExecution:
    """Run a candidate via the runner shim in a child process.

    The program (and the validation instances, for instance-based tasks) are
    written into a temporary workspace; the shim is invoked with the task id
    and the workspace path and must print exactly one JSON document to
    stdout. The child is killed at the timeout.
    """
    cmd = list(runner_cmd) if runner_cmd is not None else default_runner_cmd()
    workspace = tempfile.mkdtemp(prefix="stratevo-cand-")
    start = time.monotonic()
    try:
        with open(f"{workspace}/candidate.py", "w", encoding="utf-8") as fh:
            fh.write(program)
        if task.instances is not None:
            with open(f"{workspace}/instances.json", "w", encoding="utf-8") as fh:
                json.dump(task.instances, fh)
        try:
            proc = subprocess.run(
                cmd + [task.task_id, workspace],
                capture_output=True,
                text=True,
                timeout=timeout_s,
            )
        except subprocess.TimeoutExpired as exc:
            partial = exc.stdout
            if isinstance(partial, bytes):
                partial = partial.decode("utf-8", "replace")
            return RawExecution(
                status="timeout",
                stdout=(partial or "")[:EXCERPT_LIMIT],
                wall_s=time.monotonic() - start,
            )
        wall = time.monotonic() - start
        if proc.returncode != 0:
            return RawExecution(
                status="error",
                exit_code=proc.returncode,
                stdout=proc.stdout,
                stderr=proc.stderr,
                wall_s=wall,
            )
        try:
            payload = json.loads(proc.stdout.strip())
        except json.JSONDecodeError:
            return RawExecution(
                status="error",
                exit_code=proc.returncode,
                stdout=proc.stdout,
                stderr=proc.stderr + "\nprotocol requires JSON-only stdout",
                wall_s=wall,
            )
        if not isinstance(payload, dict):
            return RawExecution(
                status="error",
                exit_code=proc.returncode,
                stdout=proc.stdout,
                stderr=proc.stderr + "\nprotocol requires a JSON object on stdout",
                wall_s=wall,
            )
        return RawExecution(
            status="ok",
            payload=payload,
            exit_code=0,
            stdout=proc.stdout,
            stderr=proc.stderr,
            wall_s=wall,
        )
    finally:
        shutil.rmtree(workspace, ignore_errors=True)


@dataclass
class SubprocessExecutor:
    """Executor bound to a runner command (the production path)."""

    runner_cmd: list[str] | None = None

    def __call__(self, program: str, task: Task, timeout_s: float) -> RawExecution:
        return execute_candidate(program, task, timeout_s, self.runner_cmd)


class InProcessExecutor:
    """Run trusted fixture candidates in this interpreter.

    Mirrors the runner shim's payload construction without process isolation
    or timeout enforcement; meant for mock-provider desk runs and tests only.
    """

    def __call__(self, program: str, task: Task, timeout_s: float) -> RawExecution:
        start = time.monotonic()
        namespace: dict = {}
        try:
            exec(compile(program, "<candidate>", "exec"), namespace)
        except BaseException:
            return RawExecution(
                status="error",
                exit_code=1,
                stderr=traceback.format_exc(),
                wall_s=time.monotonic() - start,
            )
        entry = namespace.get(task.entry_function)
        if not callable(entry):
            return RawExecution(
                status="error",
                exit_code=2,
                stderr=f"candidate defines no {task.entry_function}() function",
                wall_s=time.monotonic() - start,
            )
        try:
            payload = build_payload(task.task_id, entry, task.instances)
        except BaseException:
            return RawExecution(
                status="error",
                exit_code=1,
                stderr=traceback.format_exc(),
                wall_s=time.monotonic() - start,
            )
        return RawExecution(
            status="ok", payload=payload, exit_code=0, wall_s=time.monotonic() - start
        )


def build_payload(task_id: str, entry: Callable, instances: list[dict] | None) -> dict:
    """Shape an entry function's return value per the candidate protocol.

    This is the contract the runner shim implements on its side of the
    process boundary; per-instance exceptions become null answers.
    """
    if task_id == SQUARE_PACKING:
        circles = [[float(x), float(y), float(r)] for x, y, r in entry()]
        return {"placement": {"circles": circles}}
    if task_id == RECT_PACKING:
        width, raw_circles = entry()
        circles = [[float(x), float(y), float(r)] for x, y, r in raw_circles]
        return {"placement": {"width": float(width), "circles": circles}}
    if task_id == MINMAX:
        points = [[float(x), float(y)] for x, y in entry()]
        return {"placement": {"points": points}}
    if task_id == INT_SEQUENCES:
        answers = []
        for instance in instances or []:
            try:
                answers.append(entry(instance))
            except Exception:
                answers.append(None)
        return {"answers": answers}
    raise TaskError(f"unknown task id {task_id!r}")
