from __future__ import annotations

import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratevo.archive import (
    Archive,
    ArchiveError,
    LogFormatError,
    TruncatedLogError,
    append_log,
    canonical_dump,
    canonical_record,
    load_run,
)
from stratevo.rng import CountingRng

from .conftest import make_archive, make_entry


class TestInsert:
    def test_first_insertion_into_empty_archive(self) -> None:
        archive = Archive(capacity=40)
        archive.insert(make_entry(0, 1.0, produced_by="seed"))
        assert len(archive) == 1
        assert archive.best_id == 0

    def test_eviction_removes_lowest_non_best(self) -> None:
        # at capacity 3 with {5.0 (best), 2.0, 3.0}: inserting 4.0 evicts 2.0
        archive = make_archive([5.0, 2.0, 3.0], capacity=3)
        archive.insert(make_entry(3, 4.0))
        assert sorted(e.fitness for e in archive.live()) == [3.0, 4.0, 5.0]
        assert 1 not in archive
        assert archive.best_id == 0

    def test_insert_better_than_best_moves_best_then_evicts(self) -> None:
        archive = make_archive([5.0, 1.0], capacity=2)
        archive.insert(make_entry(2, 7.0))
        assert archive.best_id == 2
        assert sorted(e.fitness for e in archive.live()) == [5.0, 7.0]

    def test_eviction_tie_breaks_toward_oldest_id(self) -> None:
        archive = make_archive([5.0, 2.0, 2.0], capacity=3)
        archive.insert(make_entry(3, 4.0))
        assert 1 not in archive and 2 in archive

    def test_duplicate_or_decreasing_id_rejected(self) -> None:
        archive = make_archive([1.0, 2.0])
        with pytest.raises(ArchiveError):
            archive.insert(make_entry(1, 3.0))

    def test_non_finite_fitness_rejected(self) -> None:
        archive = Archive(2)
        for bad in (float("nan"), float("inf"), float("-inf")):
            with pytest.raises(ArchiveError):
                archive.insert(make_entry(0, bad))

    def test_non_unit_embedding_rejected(self) -> None:
        entry = make_entry(0, 1.0)
        entry.strategy_embedding = [0.5, 0.5, 0.0, 0.0]
        with pytest.raises(ArchiveError):
            Archive(2).insert(entry)

    def test_behavior_length_pinned_by_first_entry(self) -> None:
        archive = Archive(4)
        archive.insert(make_entry(0, 1.0, behavior=[1, 0, 1]))
        with pytest.raises(ArchiveError):
            archive.insert(make_entry(1, 2.0, behavior=[1, 0]))


class TestBest:
    def test_singleton(self) -> None:
        archive = make_archive([2.0])
        assert archive.best().id == 0

    def test_tie_goes_to_smaller_id(self) -> None:
        archive = make_archive([2.0, 2.0])
        assert archive.best().id == 0

    def test_plain_max(self) -> None:
        archive = make_archive([2.0, 9.0, 4.0])
        assert archive.best().id == 1

    def test_empty_errors(self) -> None:
        with pytest.raises(ArchiveError):
            Archive(2).best()


class TestLog:
    def test_round_trip_identity(self, tmp_path) -> None:
        archive = make_archive([1.0, 3.5, 2.25], behaviors=[[1, 0], [0, 1], [1, 1]])
        path = tmp_path / "archive.jsonl"
        for entry in archive.live():
            append_log(entry, path)
        loaded = load_run(path, capacity=archive.capacity)
        assert canonical_dump(loaded) == canonical_dump(archive)

    def test_corrupted_middle_line_cites_line_number(self, tmp_path) -> None:
        path = tmp_path / "archive.jsonl"
        entries = [make_entry(0, 1.0), make_entry(1, 2.0), make_entry(2, 3.0)]
        for entry in entries:
            append_log(entry, path)
        lines = path.read_text().splitlines()
        lines[1] = lines[1][:20] + "#corrupt#" + lines[1][20:]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(LogFormatError) as info:
            load_run(path, capacity=10)
        assert info.value.line_no == 2

    def test_partial_trailing_line_names_salvageable_prefix(self, tmp_path) -> None:
        path = tmp_path / "archive.jsonl"
        for i in range(3):
            append_log(make_entry(i, float(i)), path)
        text = path.read_text()
        path.write_text(text + canonical_record(make_entry(3, 3.0))[:25])
        with pytest.raises(TruncatedLogError) as info:
            load_run(path, capacity=10)
        assert info.value.salvageable_lines == 3

    def test_replay_applies_same_eviction_sequence(self, tmp_path) -> None:
        rng = CountingRng(123)
        capacity = 8
        live = Archive(capacity)
        path = tmp_path / "archive.jsonl"
        for i in range(50):
            entry = make_entry(i, round(rng.random() * 10, 3), generation=i)
            live.insert(entry)
            append_log(entry, path)
        replayed = load_run(path, capacity=capacity)
        live_hash = hashlib.sha256(canonical_dump(live)).hexdigest()
        replay_hash = hashlib.sha256(canonical_dump(replayed)).hexdigest()
        assert live_hash == replay_hash

    def test_load_run_reads_capacity_from_header_sidecar(self, tmp_path) -> None:
        (tmp_path / "header.json").write_text('{"config": {"capacity": 3}}')
        path = tmp_path / "archive.jsonl"
        for i in range(5):
            append_log(make_entry(i, float(i)), path)
        archive = load_run(path)
        assert archive.capacity == 3
        assert len(archive) == 3


@given(
    fitnesses=st.lists(
        st.floats(min_value=-100, max_value=100, allow_nan=False), min_size=1, max_size=60
    ),
    capacity=st.integers(min_value=2, max_value=10),
)
@settings(max_examples=60, deadline=None)
def test_capacity_and_best_preservation_properties(fitnesses, capacity) -> None:
    archive = Archive(capacity)
    best_seen = float("-inf")
    for i, fitness in enumerate(fitnesses):
        archive.insert(make_entry(i, fitness))
        best_seen = max(best_seen, fitness)
        assert len(archive) <= capacity
        assert archive.best().fitness == best_seen
        assert archive.best_id in archive
