"""Deterministic verifiers for the geometric construction tasks.

Candidates return placements as data; fitness is always recomputed here, in
process, so evolved code cannot self-report scores. All constraints use an
absolute tolerance on unit-scale geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .results import EvaluationResult

DEFAULT_TOL = 1e-9


@dataclass
class Placement:
    """Candidate geometry: circles (with a chosen width for the rectangle
    task) or bare points."""

    circles: list[tuple[float, float, float]] | None = None
    points: list[tuple[float, float]] | None = None
    width: float | None = None


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def _overlap_violations(
    circles: Sequence[tuple[float, float, float]], tol: float
) -> list[str]:
    problems = []
    for i in range(len(circles)):
        xi, yi, ri = circles[i]
        for j in range(i + 1, len(circles)):
            xj, yj, rj = circles[j]
            dist = math.hypot(xi - xj, yi - yj)
            required = ri + rj
            if dist < required - tol:
                problems.append(
                    f"circles {i} and {j} overlap: center distance {dist!r} "
                    f"< required {required!r} (shortfall {required - dist!r})"
                )
    return problems


def _circle_sanity(circles: Sequence[tuple[float, float, float]]) -> list[str]:
    problems = []
    for i, (x, y, r) in enumerate(circles):
        if not _finite(x, y, r):
            problems.append(f"circle {i} has non-finite coordinates")
        elif r <= 0:
            problems.append(f"circle {i} has non-positive radius {r!r}")
    return problems


def _box_containment(
    circles: Sequence[tuple[float, float, float]],
    width: float,
    height: float,
    tol: float,
) -> list[str]:
    problems = []
    for i, (x, y, r) in enumerate(circles):
        limit = min(x, y, width - x, height - y)
        if r > limit + tol:
            problems.append(
                f"circle {i} leaves the container: radius {r!r} > wall "
                f"distance {limit!r} (excess {r - limit!r})"
            )
    return problems


def _circle_result(
    circles: Sequence[tuple[float, float, float]], problems: list[str]
) -> EvaluationResult:
    if problems:
        return EvaluationResult(fitness=None, violation="; ".join(problems))
    return EvaluationResult(fitness=float(sum(r for _, _, r in circles)))


def verify_square_packing(
    placement: Placement, n: int = 26, tol: float = DEFAULT_TOL
) -> EvaluationResult:
    """Sum of radii for n circles packed in the unit square, or a violation.

    Accepts iff every circle lies within all four walls (r <= wall distance +
    tol) and every pair keeps center distance >= r_i + r_j - tol.
    """
    circles = placement.circles
    if circles is None:
        return EvaluationResult(fitness=None, violation="placement has no circles")
    if len(circles) != n:
        return EvaluationResult(
            fitness=None, violation=f"expected exactly {n} circles, got {len(circles)}"
        )
    problems = _circle_sanity(circles)
    if not problems:
        problems = _box_containment(circles, 1.0, 1.0, tol)
        problems += _overlap_violations(circles, tol)
    return _circle_result(circles, problems)


def verify_rect_packing(
    placement: Placement, n: int = 21, tol: float = DEFAULT_TOL
) -> EvaluationResult:
    """Sum of radii for n circles in a perimeter-4 rectangle of chosen width.

    The candidate picks width w with 0 < w < 2; the height is 2 - w.
    """
    w = placement.width
    if w is None or not _finite(w) or not 0.0 < w < 2.0:
        return EvaluationResult(
            fitness=None,
            violation=f"invalid rectangle width {w!r}: need 0 < w < 2",
        )
    circles = placement.circles
    if circles is None:
        return EvaluationResult(fitness=None, violation="placement has no circles")
    if len(circles) != n:
        return EvaluationResult(
            fitness=None, violation=f"expected exactly {n} circles, got {len(circles)}"
        )
    problems = _circle_sanity(circles)
    if not problems:
        problems = _box_containment(circles, w, 2.0 - w, tol)
        problems += _overlap_violations(circles, tol)
    return _circle_result(circles, problems)


def verify_minmax(
    placement: Placement,
    n: int = 16,
    tol: float = DEFAULT_TOL,
    check_container: bool = True,
) -> EvaluationResult:
    """Ratio of minimum to maximum pairwise distance over n points.

    Coincident points yield fitness 0 rather than an error. The unit-square
    bound can be disabled (test hook) since the ratio itself is invariant
    under rigid motions.
    """
    points = placement.points
    if points is None:
        return EvaluationResult(fitness=None, violation="placement has no points")
    if len(points) != n:
        return EvaluationResult(
            fitness=None, violation=f"expected exactly {n} points, got {len(points)}"
        )
    for i, (x, y) in enumerate(points):
        if not _finite(x, y):
            return EvaluationResult(
                fitness=None, violation=f"point {i} has non-finite coordinates"
            )
        if check_container and not (
            -tol <= x <= 1.0 + tol and -tol <= y <= 1.0 + tol
        ):
            return EvaluationResult(
                fitness=None,
                violation=f"point {i} at ({x!r}, {y!r}) leaves the unit square",
            )
    d_min = math.inf
    d_max = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = math.hypot(points[i][0] - points[j][0], points[i][1] - points[j][1])
            d_min = min(d_min, d)
            d_max = max(d_max, d)
    if d_max == 0.0 or d_min == 0.0:
        return EvaluationResult(fitness=0.0)
    return EvaluationResult(fitness=d_min / d_max)
