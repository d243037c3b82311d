from __future__ import annotations

import sys

from . import run_candidate


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        print("usage: candidate_runner <task_id> <workspace>", file=sys.stderr)
        return 2
    return run_candidate(args[0], args[1])


if __name__ == "__main__":
    sys.exit(main())
