"""Operator commands: launch, resume, and report on runs.

Humans act before a run (write the config) and after it (read the report);
the run itself is autonomous. One process per run directory, enforced with a
lock file.
"""

from __future__ import annotations

import argparse
import os
import sys

from .archive import LogFormatError, TruncatedLogError, load_run
from .config import ConfigError, RunConfig
from .engine import SeedEvaluationError, resume_run, run
from .providers import ProviderError
from .runio import RunDirError, RunDirectory, RunLocked
from .strategy_space import cluster, export_embeddings_csv
from .tasks import build_task


def _load_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError([f"config file not found: {path}"])
    return RunConfig.from_file(path)


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if args.run_dir:
        config.output_dir = args.run_dir
    if not config.output_dir:
        print("error: no run directory (set output_dir or pass --run-dir)", file=sys.stderr)
        return 2
    result = run(config)
    print(f"run directory: {config.output_dir}")
    print(f"best fitness: {result.best.fitness!r} (entry {result.best.id})")
    print(f"total cost: ${result.totals.cost_usd!r}")
    if result.halted_reason:
        print(
            f"run halted before generation {config.total_generations}: "
            f"{result.halted_reason}\nstate is flushed; continue with "
            f"'stratevo resume --run-dir {config.output_dir}'",
            file=sys.stderr,
        )
        return 1
    return 0


def cmd_resume(args: argparse.Namespace) -> int:
    rundir = RunDirectory.open_existing(args.run_dir)
    if not os.path.exists(rundir.state_path):
        print(
            f"error: {args.run_dir} has no resumable state (the run never "
            "finished seeding); delete the directory and rerun",
            file=sys.stderr,
        )
        return 1
    state = rundir.read_state()
    if state.get("completed"):
        print(f"{args.run_dir}: run already complete; nothing to do")
        return 0
    result = resume_run(args.run_dir)
    print(
        f"resumed from generation {result.resumed_from}; "
        f"best fitness: {result.best.fitness!r}"
    )
    if result.halted_reason:
        print(f"run halted again: {result.halted_reason}", file=sys.stderr)
        return 1
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rundir = RunDirectory.open_existing(args.run_dir)
    header = rundir.verify_header()
    config = RunConfig.from_dict(header["config"])
    if not os.path.exists(rundir.archive_path):
        print("error: run has no archive log yet", file=sys.stderr)
        return 1
    state = rundir.read_state() if os.path.exists(rundir.state_path) else {}
    archive = load_run(rundir.archive_path, config.capacity)
    task = build_task(config.task_id, config.task_params)
    best = archive.best()

    completed = bool(state.get("completed"))
    done = int(state.get("next_generation", 1)) - 1
    status = (
        "complete"
        if completed
        else f"PARTIAL (finished generation {done} of {config.total_generations})"
    )
    print(f"task: {task.task_id}")
    print(f"status: {status}")
    if task.reference:
        ratio = best.fitness / task.reference
        print(
            f"best fitness: {best.fitness!r} "
            f"(reference {task.reference!r}, {ratio:.4f} of reference)"
        )
    else:
        print(f"best fitness: {best.fitness!r}")
    print(f"generations to best: {best.generation}")
    print(f"total cost: ${state.get('cost_usd', 0.0)!r}")
    print(f"trajectory CSV: {rundir.trajectory_path}")
    return 0


def cmd_export_embeddings(args: argparse.Namespace) -> int:
    rundir = RunDirectory.open_existing(args.run_dir)
    header = rundir.verify_header()
    config = RunConfig.from_dict(header["config"])
    archive = load_run(rundir.archive_path, config.capacity)
    embeddings = {e.id: e.strategy_embedding for e in archive.live()}
    state = cluster(embeddings, config.clusters, config.seed)
    export_embeddings_csv(archive, state, args.out)
    print(f"wrote {len(embeddings)} rows to {args.out}")
    return 0


def cmd_validate_config(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    print(f"config ok: task={config.task_id}, T={config.total_generations}, "
          f"seed={config.seed}, providers={config.providers.mode}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stratevo",
        description="Strategy-archive evolutionary program search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="start a fresh run from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--run-dir", help="override the config's output_dir")
    p_run.set_defaults(func=cmd_run)

    p_resume = sub.add_parser("resume", help="continue an interrupted run")
    p_resume.add_argument("--run-dir", required=True)
    p_resume.set_defaults(func=cmd_resume)

    p_report = sub.add_parser("report", help="summarize a run (read-only)")
    p_report.add_argument("--run-dir", required=True)
    p_report.set_defaults(func=cmd_report)

    p_export = sub.add_parser(
        "export-embeddings",
        help="dump live entries' embeddings and cluster labels to CSV",
    )
    p_export.add_argument("--run-dir", required=True)
    p_export.add_argument("--out", required=True)
    p_export.set_defaults(func=cmd_export_embeddings)

    p_validate = sub.add_parser("validate-config", help="check a config file")
    p_validate.add_argument("--config", required=True)
    p_validate.set_defaults(func=cmd_validate_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        RunDirError,
        RunLocked,
        LogFormatError,
        TruncatedLogError,
        SeedEvaluationError,
        ProviderError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
