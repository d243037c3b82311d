"""Execution shim for evolved candidate programs.

Invoked as ``candidate_runner <task_id> <workspace>``. Loads
``<workspace>/candidate.py`` in this (child) process, calls the task's entry
function, and prints the result as exactly one JSON document on stdout:

- ``square_packing`` / ``rect_packing``: ``construct_packing()`` returning a
  list of ``(x, y, r)`` triples (the rectangle variant returns
  ``(width, circles)``) -> ``{"placement": {...}}``
- ``minmax``: ``construct_points()`` -> ``{"placement": {"points": [...]}}``
- ``int_sequences``: ``solve(instance)`` called once per instance from
  ``<workspace>/instances.json`` -> ``{"answers": [...]}``; an instance that
  raises contributes ``null``.

Anything the candidate prints is rerouted to stderr so stdout stays pure
protocol. Exit codes: 0 ok, 1 the candidate raised, 2 protocol violation
(unknown task, missing candidate file, missing entry function) with an error
JSON on stdout. Sandboxing is best-effort only: sockets are disabled and an
address-space ceiling is applied where the platform permits; the parent
process owns the wall-clock timeout.
"""

from __future__ import annotations

import importlib.util
import json
import numbers
import os
import sys
import traceback
from typing import Any, Callable, TextIO

MEM_CEILING_ENV = "CANDIDATE_RUNNER_MEM_BYTES"
DEFAULT_MEM_CEILING = 1 << 30  # 1 GiB

ENTRY_FUNCTIONS = {
    "square_packing": "construct_packing",
    "rect_packing": "construct_packing",
    "minmax": "construct_points",
    "int_sequences": "solve",
}

EXIT_OK = 0
EXIT_CANDIDATE_ERROR = 1
EXIT_PROTOCOL_ERROR = 2


def apply_limits() -> None:
    """Best-effort isolation: no sockets, bounded address space."""
    try:
        import socket

        def _blocked(*args: Any, **kwargs: Any) -> Any:
            raise OSError("network access is disabled inside the candidate runner")

        socket.socket = _blocked  # type: ignore[misc,assignment]
        socket.create_connection = _blocked  # type: ignore[assignment]
    except Exception:
        pass
    try:
        import resource

        ceiling = int(os.environ.get(MEM_CEILING_ENV, DEFAULT_MEM_CEILING))
        resource.setrlimit(resource.RLIMIT_AS, (ceiling, ceiling))
    except Exception:
        pass


def _protocol_error(out: TextIO, code: str, message: str) -> int:
    json.dump({"error": {"code": code, "message": message}}, out)
    out.write("\n")
    return EXIT_PROTOCOL_ERROR


def _load_candidate(path: str) -> Any:
    spec = importlib.util.spec_from_file_location("candidate", path)
    assert spec is not None and spec.loader is not None
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def _clean_answer(value: Any) -> Any:
    """Keep JSON-basic answers; coerce exact integer types; drop the rest."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, numbers.Integral):
        return int(value)
    return None


def build_payload(
    task_id: str, entry: Callable[..., Any], workspace: str
) -> dict[str, Any]:
    if task_id == "square_packing":
        circles = [[float(x), float(y), float(r)] for x, y, r in entry()]
        return {"placement": {"circles": circles}}
    if task_id == "rect_packing":
        width, raw = entry()
        circles = [[float(x), float(y), float(r)] for x, y, r in raw]
        return {"placement": {"width": float(width), "circles": circles}}
    if task_id == "minmax":
        points = [[float(x), float(y)] for x, y in entry()]
        return {"placement": {"points": points}}
    # int_sequences
    with open(os.path.join(workspace, "instances.json"), "r", encoding="utf-8") as fh:
        instances = json.load(fh)
    answers: list[Any] = []
    for instance in instances:
        try:
            answers.append(_clean_answer(entry(instance)))
        except Exception:
            print(
                f"instance {instance.get('index')} raised:\n{traceback.format_exc()}",
                file=sys.stderr,
            )
            answers.append(None)
    return {"answers": answers}


def run_candidate(task_id: str, workspace: str) -> int:
    """Execute one candidate; returns the process exit code."""
    real_stdout = sys.stdout
    sys.stdout = sys.stderr  # candidate prints must not pollute the protocol
    try:
        if task_id not in ENTRY_FUNCTIONS:
            return _protocol_error(
                real_stdout, "unknown_task", f"unknown task id {task_id!r}"
            )
        candidate_path = os.path.join(workspace, "candidate.py")
        if not os.path.exists(candidate_path):
            return _protocol_error(
                real_stdout, "missing_candidate", f"no candidate.py in {workspace}"
            )
        apply_limits()
        try:
            module = _load_candidate(candidate_path)
        except BaseException:
            traceback.print_exc(file=sys.stderr)
            return EXIT_CANDIDATE_ERROR
        entry_name = ENTRY_FUNCTIONS[task_id]
        entry = getattr(module, entry_name, None)
        if not callable(entry):
            return _protocol_error(
                real_stdout,
                "missing_entry",
                f"candidate defines no {entry_name}() function",
            )
        try:
            payload = build_payload(task_id, entry, workspace)
        except BaseException:
            traceback.print_exc(file=sys.stderr)
            return EXIT_CANDIDATE_ERROR
        json.dump(payload, real_stdout)
        real_stdout.write("\n")
        return EXIT_OK
    finally:
        sys.stdout = real_stdout
