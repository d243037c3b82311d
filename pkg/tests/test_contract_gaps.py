"""Contract details not naturally covered by the per-module suites."""

from __future__ import annotations

from stratevo.config import RunConfig
from stratevo.engine import extract_program, run
from stratevo.providers import HashEmbeddingProvider, MockChatProvider, MockScript, Providers
from stratevo.rng import CountingRng
from stratevo.tasks import Placement, verify_square_packing

from .conftest import make_archive
from .test_engine import sa_step
from .test_tasks import random_square_placements


class TestExtractProgram:
    def test_prose_then_single_fence(self) -> None:
        text = "Here you go:\n```PROGRAM\nx = 1\n```\nenjoy"
        assert extract_program(text) == "x = 1"

    def test_two_fences_takes_the_first(self) -> None:
        text = "```PROGRAM\nfirst = 1\n```\n\n```PROGRAM\nsecond = 2\n```"
        assert extract_program(text) == "first = 1"

    def test_untagged_fence_accepted_when_no_tagged_one(self) -> None:
        text = "```python\ny = 2\n```"
        assert extract_program(text) == "y = 2"

    def test_no_fence_returns_none(self) -> None:
        assert extract_program("no code here") is None
        assert extract_program("```PROGRAM\n\n```") is None


class TestSaPromptCorpus:
    def test_no_inspiration_source_in_any_sa_prompt(self) -> None:
        """Every SA prompt carries exactly one program source: the parent's."""
        marker = "UNIQUE_SRC_MARKER"
        steps = {
            "sa": [
                sa_step(
                    f"def construct_packing():\n"
                    f"    {marker}_{t} = 0\n"
                    f"    return [(0.5, 0.5, {0.05 + t * 0.01})]\n",
                    strategy=f"scripted strategy {t}",
                )
                for t in range(1, 16)
            ]
        }
        config = RunConfig(
            task_id="square_packing",
            task_params={
                "n": 1,
                "seed_program": f"def construct_packing():\n"
                f"    {marker}_0 = 0\n"
                f"    return [(0.5, 0.5, 0.05)]\n",
            },
            total_generations=15,
            warmup=4,
            clusters=3,
            exploration=0.0,
            seed=8,
        )
        providers = Providers(
            chat=MockChatProvider(MockScript(steps=steps, fill="synth")),
            embed=HashEmbeddingProvider(dim=16, seed=0),
        )
        result = run(config, providers=providers)
        sa_prompts = [r.request_user for r in result.transcript if r.purpose == "sa"]
        assert len(sa_prompts) == 15
        clustered_prompts = 0
        for prompt in sa_prompts:
            assert prompt.count(marker) == 1
            if "role: intra" in prompt or "role: cross" in prompt:
                clustered_prompts += 1
        assert clustered_prompts > 0  # clustering really activated mid-run

    def test_seed_entry_has_nonempty_description(self) -> None:
        config = RunConfig(task_id="int_sequences", total_generations=1, seed=0)
        result = run(config)
        assert result.archive.get(0).strategy_description.strip()


class TestVerifierSoundness:
    def test_accept_at_half_tolerance_implies_accept_at_full(self) -> None:
        n = 8
        checked_accepts = 0
        for circles in random_square_placements(400, n, seed=2024):
            strict = verify_square_packing(Placement(circles=circles), n=n, tol=0.5e-9)
            loose = verify_square_packing(Placement(circles=circles), n=n, tol=1e-9)
            if strict.ok:
                assert loose.ok
                checked_accepts += 1
        assert checked_accepts > 20

    def test_rejection_reports_are_reproducible(self) -> None:
        n = 8
        for circles in random_square_placements(200, n, seed=11):
            first = verify_square_packing(Placement(circles=circles), n=n)
            second = verify_square_packing(Placement(circles=circles), n=n)
            assert first.ok == second.ok
            if not first.ok:
                assert first.violation == second.violation


class TestPickSetInvariants:
    def test_no_duplicates_and_parent_excluded_when_avoidable(self) -> None:
        from stratevo.strategy_space import select_inspirations

        for trial in range(150):
            rng = CountingRng(9_000 + trial)
            n = 1 + rng.randrange(12)
            archive = make_archive([rng.randrange(40) / 4.0 for _ in range(n)])
            parent = archive.get(rng.randrange(n))
            result = select_inspirations(
                archive, parent, rng.randrange(20), 10, None, CountingRng(trial)
            )
            ids = [p.entry.id for p in result.picks]
            assert len(ids) == len(set(ids))
            assert len(ids) == min(2, n - 1)
            if n >= 3:
                assert parent.id not in ids
