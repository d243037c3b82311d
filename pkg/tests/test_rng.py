from __future__ import annotations

import pytest

from stratevo.rng import CountingRng


def test_same_seed_same_stream() -> None:
    a = CountingRng(42)
    b = CountingRng(42)
    assert [a.random() for _ in range(50)] == [b.random() for _ in range(50)]


def test_different_seeds_differ() -> None:
    a = CountingRng(1)
    b = CountingRng(2)
    assert [a.random() for _ in range(10)] != [b.random() for _ in range(10)]


def test_position_counts_draws() -> None:
    rng = CountingRng(7)
    rng.random()
    rng.randrange(5)
    rng.choice([1, 2, 3])
    assert rng.position == 3


def test_restore_from_position_continues_stream() -> None:
    rng = CountingRng(9)
    head = [rng.random() for _ in range(10)]
    tail = [rng.random() for _ in range(10)]

    replay = CountingRng(9)
    assert [replay.random() for _ in range(10)] == head
    restored = CountingRng(9, position=10)
    assert [restored.random() for _ in range(10)] == tail


def test_random_in_unit_interval() -> None:
    rng = CountingRng(0)
    values = [rng.random() for _ in range(1000)]
    assert all(0.0 <= v < 1.0 for v in values)
    # crude uniformity sanity check
    assert 0.4 < sum(values) / len(values) < 0.6


def test_randrange_bounds_and_coverage() -> None:
    rng = CountingRng(3)
    seen = {rng.randrange(4) for _ in range(200)}
    assert seen == {0, 1, 2, 3}
    with pytest.raises(ValueError):
        rng.randrange(0)


def test_choice_empty_errors() -> None:
    with pytest.raises(IndexError):
        CountingRng(0).choice([])
