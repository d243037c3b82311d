"""Synthetic instance-based task: next term of an integer sequence.

Each validation instance gives the first five terms of a sequence with a
constant second difference (arithmetic sequences included as the zero case);
the candidate's ``solve(instance)`` must return the sixth term exactly. The
per-instance success bits form the behavior vector used for complementarity
scoring, and fitness is their mean.
"""

from __future__ import annotations

from ..rng import CountingRng
from .results import EvaluationResult

DEFAULT_INSTANCE_COUNT = 32
DEFAULT_INSTANCE_SEED = 7

TERMS_SHOWN = 5


def sequence_term(a0: int, d: int, c: int, i: int) -> int:
    """Term i of the sequence with start a0, first difference d at step 0,
    and constant second difference c."""
    return a0 + d * i + c * (i * (i - 1) // 2)


def make_instances(
    count: int = DEFAULT_INSTANCE_COUNT, seed: int = DEFAULT_INSTANCE_SEED
) -> list[dict]:
    """The fixed validation set for one run, fully determined by the seed."""
    rng = CountingRng(seed)
    instances = []
    for k in range(count):
        a0 = rng.randrange(19) - 9
        d = rng.randrange(11) - 5
        # Half the instances are plain arithmetic, half genuinely quadratic.
        c = 0 if k % 2 == 0 else (rng.randrange(6) - 3) or 1
        terms = [sequence_term(a0, d, c, i) for i in range(TERMS_SHOWN)]
        instances.append({"index": k, "terms": terms})
    return instances


def oracle_answer(instance: dict) -> int:
    """Sixth term recovered from the shown terms via second differences."""
    t = instance["terms"]
    return 3 * t[-1] - 3 * t[-2] + t[-3]


def score_answers(answers: list, instances: list[dict]) -> EvaluationResult:
    """Bit k is 1 iff the candidate's answer matches the oracle on instance k.

    Missing answers and non-integer values count as failures; fitness is the
    mean of the bits.
    """
    bits: list[int] = []
    for k, instance in enumerate(instances):
        expected = oracle_answer(instance)
        got = answers[k] if k < len(answers) else None
        bits.append(1 if isinstance(got, int) and not isinstance(got, bool) and got == expected else 0)
    return EvaluationResult(
        fitness=sum(bits) / len(bits),
        behavior_vector=bits,
    )
