from __future__ import annotations

import json

from stratevo.archive import Archive
from stratevo.config import RunConfig
from stratevo.engine import resume_run, run
from stratevo.strategy_space import cluster

from .conftest import make_archive, make_entry, mixed_unit_vector
from .test_cli import log_digest


class TestArchiveEdges:
    def test_incoming_worst_entry_survives_and_second_worst_evicted(self) -> None:
        # the policy only ever evicts prior entries, never the incoming one
        archive = make_archive([5.0, 2.0, 3.0], capacity=3)
        archive.insert(make_entry(3, 0.5))
        fits = sorted(e.fitness for e in archive.live())
        assert fits == [0.5, 3.0, 5.0]
        assert 1 not in archive and 3 in archive

    def test_capacity_two_keeps_best_and_newest(self) -> None:
        archive = make_archive([5.0, 1.0], capacity=2)
        archive.insert(make_entry(2, 0.1))
        assert sorted(e.id for e in archive.live()) == [0, 2]


class TestClusterEdges:
    def test_fewer_points_than_clusters(self) -> None:
        embeddings = {i: mixed_unit_vector(4, i) for i in range(3)}
        state = cluster(embeddings, c=5, seed=1)
        assert state.effective_c == 3
        assert set(state.assignments.values()) == {0, 1, 2}


class TestEngineEdges:
    def test_single_cluster_config_pads_cross_slot(self) -> None:
        # clusters=1 means there is never another cluster to draw from
        config = RunConfig(
            task_id="int_sequences",
            total_generations=8,
            warmup=0,
            clusters=1,
            exploration=0.0,
            seed=6,
        )
        result = run(config)
        assert result.completed
        sa_calls = [r for r in result.transcript if r.purpose == "sa"]
        assert len(sa_calls) == 8

    def test_warmup_zero_clusters_from_first_possible_generation(self) -> None:
        config = RunConfig(
            task_id="int_sequences",
            total_generations=6,
            warmup=0,
            clusters=2,
            exploration=0.0,
            seed=14,
        )
        result = run(config)
        assert result.completed
        assert len(result.archive) == 7  # seed + 6 clones


class TestScenarioFileResume:
    def test_resume_with_scenario_file_matches_straight_run(self, tmp_path) -> None:
        scenario = {
            "steps": {
                "describe": [f"scripted description {i}" for i in range(40)],
            },
            "fill": "synth",
        }
        scenario_path = tmp_path / "scenario.json"
        scenario_path.write_text(json.dumps(scenario))

        def config_for(name: str) -> RunConfig:
            cfg = RunConfig(
                task_id="int_sequences",
                total_generations=12,
                exploration=0.5,  # plenty of describe calls
                seed=31,
                output_dir=str(tmp_path / name),
            )
            cfg.providers.mock_scenario_path = str(scenario_path)
            return cfg

        run(config_for("straight"))
        run(config_for("cut"), stop_after=5)
        resumed = resume_run(str(tmp_path / "cut"))
        assert resumed.completed
        assert log_digest(str(tmp_path / "cut")) == log_digest(str(tmp_path / "straight"))


class TestConfigRoundTrip:
    def test_to_dict_from_dict_is_stable(self) -> None:
        config = RunConfig(
            task_id="rect_packing",
            task_params={"n": 21},
            total_generations=60,
            seed=5,
            exploration=0.3,
        )
        config.providers.mode = "http"
        config.providers.chat.model = "some-model"
        config.providers.chat.price_input_per_token = 1e-6
        once = config.to_dict()
        again = RunConfig.from_dict(once).to_dict()
        assert once == again

    def test_header_config_reproduces_run(self, tmp_path) -> None:
        config = RunConfig(
            task_id="int_sequences",
            total_generations=10,
            seed=77,
            output_dir=str(tmp_path / "orig"),
        )
        run(config)
        header = json.loads((tmp_path / "orig" / "header.json").read_text())
        replayed = RunConfig.from_dict(header["config"])
        replayed.output_dir = str(tmp_path / "replay")
        run(replayed)
        assert log_digest(str(tmp_path / "orig")) == log_digest(str(tmp_path / "replay"))
