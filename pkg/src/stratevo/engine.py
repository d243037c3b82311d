"""The outer evolutionary loop.

Seeds the archive, then for each generation selects a parent, refreshes the
landscape guidance on its fixed schedule, and routes the mutation either
through the strategy pipeline (cluster, retrieve inspirations, single
diagnose/direct/implement call) or, with the configured exploration
probability, through the plain base mutation prompt. Every candidate is executed, scored
in-process from the placement/answer data it emitted, described and
embedded, and inserted into the archive.

All randomness flows from one counting RNG with a fixed draw order per
generation:

1. one uniform draw deciding the route,
2. parent selection: one elitist draw, plus three tournament index draws
   when the elitist shortcut does not fire,
3. strategy route with clustering active: one draw for the k-means seed,
4. inside inspiration selection: one index draw over the other nonempty
   clusters (clustered mode only).

Guidance refreshes consume no draws. Persisting the draw counter (plus the
mock scenario cursor) each generation therefore makes an interrupted run
resumable with byte-identical logs.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

from .archive import Archive, ArchiveEntry, Cost
from .articulation import (
    build_sa_prompt,
    describe_program,
    load_template,
    parse_sa_response,
)
from .config import ProvidersConfig, RunConfig
from .navigation import (
    LandscapeGuidance,
    build_sln_prompt,
    parse_guidance,
    should_refresh,
)
from .parsing import ParseFailure, extract_tagged_section, first_fence
from .providers import (
    ChatExchange,
    EmbeddingResult,
    HashEmbeddingProvider,
    HttpChatProvider,
    HttpEmbeddingProvider,
    MockChatProvider,
    MockScript,
    Providers,
    ProviderExhausted,
    ScenarioExhausted,
)
from .rng import CountingRng
from .runio import RunDirectory, TranscriptRecord, TrajectoryRow
from .strategy_space import cluster, select_inspirations
from .tasks import InProcessExecutor, SubprocessExecutor, Task, build_task

ROUTE_BASE = "base"
ROUTE_STRATEGY = "strategy"
ROUTE_SKIPPED = "skipped"
ROUTE_SEED = "seed"

ELITIST_PROB = 0.1
TOURNAMENT_SIZE = 3

SLN_SYSTEM_PROMPT = (
    "You analyze the trajectory of an automated algorithm search and report "
    "which families of strategies are working, exhausted, or missing."
)


class SeedEvaluationError(Exception):
    """The initial program failed its own evaluation; the run cannot start."""


@dataclass
class Totals:
    chat_calls: int = 0
    embedding_calls: int = 0
    cost_usd: float = 0.0
    wall_s: float = 0.0


@dataclass
class RunResult:
    best: ArchiveEntry
    trajectory: list[TrajectoryRow]
    totals: Totals
    archive: Archive
    transcript: list[TranscriptRecord]
    guidance_log: list[LandscapeGuidance]
    completed: bool
    resumed_from: int | None = None
    halted_reason: str | None = None


def build_providers(config: ProvidersConfig) -> Providers:
    """Real HTTP providers or deterministic mocks, per the config mode."""
    if config.mode == "mock":
        script = (
            MockScript.from_file(config.mock_scenario_path)
            if config.mock_scenario_path
            else None
        )
        return Providers(
            chat=MockChatProvider(
                script,
                price_input_per_token=config.chat.price_input_per_token,
                price_output_per_token=config.chat.price_output_per_token,
            ),
            embed=HashEmbeddingProvider(
                dim=config.mock_embedding_dim,
                seed=config.mock_embedding_seed,
                price_per_token=config.embedding.price_per_token,
            ),
        )
    return Providers(
        chat=HttpChatProvider(
            config.chat, config.retry_budget, config.timeout_s, config.backoff_s
        ),
        embed=HttpEmbeddingProvider(
            config.embedding, config.retry_budget, config.timeout_s, config.backoff_s
        ),
    )


def make_executor(config: RunConfig):
    """Pick the evaluation path: child-process runner or in-process.

    ``auto`` uses the runner shim for real (http) providers, whose candidate
    programs are untrusted model output, and the in-process path for mock
    runs over trusted fixtures.
    """
    mode = config.eval_mode
    if mode == "auto":
        mode = "runner" if config.providers.mode == "http" else "inprocess"
    if mode == "runner":
        return SubprocessExecutor(config.runner_cmd)
    return InProcessExecutor()


def epsilon_route(rng: CountingRng, epsilon: float) -> str:
    """Base route iff the next uniform draw lands below epsilon."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be within [0, 1], got {epsilon}")
    return ROUTE_BASE if rng.random() < epsilon else ROUTE_STRATEGY


def base_select(archive: Archive, rng: CountingRng) -> ArchiveEntry:
    """Size-3 tournament over the live set, with a 10% elitist shortcut.

    Consumes one uniform draw; when the shortcut does not fire, three more
    index draws (with replacement, over live entries in id order). The
    tournament winner is the highest fitness, smaller id on ties.
    """
    live = archive.live()
    if not live:
        raise ValueError("cannot select from an empty archive")
    if rng.random() < ELITIST_PROB:
        return archive.best()
    contenders = [live[rng.randrange(len(live))] for _ in range(TOURNAMENT_SIZE)]
    return max(contenders, key=lambda e: (e.fitness, -e.id))


def extract_program(text: str) -> str | None:
    """The PROGRAM-tagged fence if present, else the first fence of any kind."""
    program = extract_tagged_section(text, "PROGRAM")
    if program is None:
        program = first_fence(text)
    if program is None or not program.strip():
        return None
    return program


def base_mutate(
    parent: ArchiveEntry,
    task_brief: str,
    system_prompt: str,
    chat,
    attempts: int = 2,
) -> str | None:
    """Plain improve-this-program mutation: parent source, fitness, brief,
    and no strategy material. Returns None when no attempt yields a fence."""
    prompt = load_template("base_prompt.txt").substitute(
        task_brief=task_brief,
        parent_fitness=repr(parent.fitness),
        parent_program=parent.program_source,
    )
    for _ in range(attempts):
        exchange = chat.complete(system=system_prompt, user=prompt)
        program = extract_program(exchange.response_text)
        if program is not None:
            return program
    return None


class _PurposeChat:
    """Chat handle that records every exchange under one purpose tag."""

    def __init__(self, engine: "EvolutionEngine", purpose: str, generation: int) -> None:
        self._engine = engine
        self.purpose = purpose
        self.generation = generation
        self.system_prompt = engine.task.system_prompt

    def complete(self, system: str, user: str) -> ChatExchange:
        return self._engine._chat(self.purpose, self.generation, system, user)


class EvolutionEngine:
    """Mutable state of one run; drives generations and writes the logs."""

    def __init__(
        self,
        config: RunConfig,
        task: Task,
        providers: Providers,
        executor,
        rundir: RunDirectory | None = None,
    ) -> None:
        config.validate()
        self.config = config
        self.task = task
        self.providers = providers
        self.executor = executor
        self.rundir = rundir
        self.rng = CountingRng(config.seed)
        self.archive = Archive(config.capacity)
        self.guidance: LandscapeGuidance | None = None
        self.guidance_log: list[LandscapeGuidance] = []
        self.trajectory: list[TrajectoryRow] = []
        self.transcript: list[TranscriptRecord] = []
        self.route_counts = {ROUTE_BASE: 0, ROUTE_STRATEGY: 0, ROUTE_SKIPPED: 0}
        self.next_entry_id = 0
        self.next_generation = 1
        self.chat_calls = 0
        self.embedding_calls = 0
        self.cost_usd = 0.0
        self.transcript_index = 0
        self.completed = False
        self.resumed_from: int | None = None
        self.halted_reason: str | None = None
        self._entry_cost = Cost()
        self._wall_prior = 0.0
        self._started = time.monotonic()

    # ------------------------------------------------------------------
    # provider recording

    def _chat(
        self,
        purpose: str,
        generation: int,
        system: str,
        user: str,
        attribute_to_entry: bool = True,
    ) -> ChatExchange:
        exchange = self.providers.chat.complete(system, user)
        record = TranscriptRecord(
            index=self.transcript_index,
            generation=generation,
            kind="chat",
            purpose=purpose,
            model=exchange.request.model,
            prompt_tokens=exchange.prompt_tokens,
            completion_tokens=exchange.completion_tokens,
            cost_usd=exchange.cost_usd,
            latency_s=exchange.latency_s,
            request_system=system,
            request_user=user,
            response_text=exchange.response_text,
        )
        self._record(record)
        self.chat_calls += 1
        if attribute_to_entry:
            self._entry_cost.add(
                Cost(
                    usd=exchange.cost_usd,
                    prompt_tokens=exchange.prompt_tokens,
                    completion_tokens=exchange.completion_tokens,
                )
            )
        return exchange

    def _embed(self, generation: int, text: str) -> EmbeddingResult:
        result = self.providers.embed.embed(text)
        record = TranscriptRecord(
            index=self.transcript_index,
            generation=generation,
            kind="embed",
            purpose="embed",
            model=getattr(self.providers.embed, "model", "mock-embed"),
            prompt_tokens=result.tokens,
            completion_tokens=0,
            cost_usd=result.cost_usd,
            latency_s=0.0,
            input_text=text,
        )
        self._record(record)
        self.embedding_calls += 1
        self._entry_cost.add(Cost(usd=result.cost_usd, embedding_tokens=result.tokens))
        return result

    def _record(self, record: TranscriptRecord) -> None:
        self.transcript_index += 1
        self.cost_usd += record.cost_usd
        self.transcript.append(record)
        if self.rundir is not None:
            self.rundir.append_transcript(record)

    # ------------------------------------------------------------------
    # run state

    def _purpose_chat(self, purpose: str, generation: int) -> _PurposeChat:
        return _PurposeChat(self, purpose, generation)

    def _state_dict(self) -> dict:
        chat = self.providers.chat
        return {
            "completed": self.completed,
            "next_generation": self.next_generation,
            "rng_position": self.rng.position,
            "next_entry_id": self.next_entry_id,
            "chat_calls": self.chat_calls,
            "embedding_calls": self.embedding_calls,
            "cost_usd": self.cost_usd,
            "transcript_index": self.transcript_index,
            "route_counts": dict(self.route_counts),
            "guidance_count": len(self.guidance_log),
            "guidance": None if self.guidance is None else self.guidance.to_dict(),
            "mock_chat_consumed": (
                dict(chat.consumed) if isinstance(chat, MockChatProvider) else None
            ),
            "wall_s": self.wall_s(),
        }

    def _write_state(self) -> None:
        if self.rundir is not None:
            self.rundir.write_state(self._state_dict())

    def wall_s(self) -> float:
        return self._wall_prior + (time.monotonic() - self._started)

    # ------------------------------------------------------------------
    # generations

    def bootstrap(self) -> None:
        """Evaluate, describe, embed and archive the seed program."""
        result = self._evaluate(self.task.seed_program)
        if not result.ok:
            raise SeedEvaluationError(
                f"seed program failed evaluation: {result.violation}"
            )
        self._entry_cost = Cost()
        description = describe_program(
            self.task.seed_program, self.task.brief, self._purpose_chat("describe", 0)
        )
        embedding = self._embed(0, description)
        entry = ArchiveEntry(
            id=0,
            parent_id=None,
            generation=0,
            program_source=self.task.seed_program,
            fitness=result.fitness,
            strategy_description=description,
            strategy_embedding=embedding.vector,
            behavior_vector=result.behavior_vector,
            produced_by="seed",
            cost=self._entry_cost,
        )
        self.archive.insert(entry)
        self.next_entry_id = 1
        if self.rundir is not None:
            self.rundir.append_entry(entry)
        self._append_trajectory(0, result.fitness, ROUTE_SEED, count_route=False)
        self._write_state()

    def _evaluate(self, program: str):
        return self.task.evaluate(program, self.executor, self.config.eval_timeout_s)

    def _refresh_guidance(self, t: int) -> None:
        """One refresh attempt plus one retry; stale guidance is kept on
        total failure (it stays active until the next scheduled refresh)."""
        prompt = build_sln_prompt(self.archive, self.config.sln_entry_cap)
        for _ in range(2):
            exchange = self._chat(
                "sln", t, SLN_SYSTEM_PROMPT, prompt, attribute_to_entry=False
            )
            try:
                guidance = parse_guidance(exchange.response_text, t)
            except ParseFailure:
                continue
            self.guidance = guidance
            self.guidance_log.append(guidance)
            if self.rundir is not None:
                self.rundir.append_guidance(guidance)
            return

    def step(self, t: int) -> None:
        """Run one generation; skipped generations still advance the clock
        and still hit the guidance schedule."""
        config = self.config
        self._entry_cost = Cost()
        route = epsilon_route(self.rng, config.exploration)
        parent = base_select(self.archive, self.rng)
        if should_refresh(t, config.sln_interval):
            self._refresh_guidance(t)

        program: str | None = None
        description = ""
        produced_by = "base_fallback"
        if route == ROUTE_STRATEGY:
            cluster_state = None
            if t >= config.warmup and len(self.archive) >= config.clusters + 1:
                kmeans_seed = self.rng.randrange(2**63)
                embeddings = {
                    e.id: e.strategy_embedding for e in self.archive.live()
                }
                cluster_state = cluster(embeddings, config.clusters, kmeans_seed)
            inspirations = select_inspirations(
                self.archive, parent, t, config.warmup, cluster_state, self.rng
            )
            prompt = build_sa_prompt(
                parent, inspirations, self.guidance, self.task.brief
            )
            parsed = None
            for _ in range(config.parse_attempts):
                exchange = self._chat("sa", t, self.task.system_prompt, prompt)
                try:
                    parsed = parse_sa_response(exchange.response_text)
                    break
                except ParseFailure:
                    continue
            if parsed is not None:
                program = parsed.program
                description = parsed.strategy
                produced_by = "strategy_pipeline"
            else:
                route = ROUTE_BASE  # malformed mutation output: fall back

        if program is None and route == ROUTE_BASE:
            program = base_mutate(
                parent,
                self.task.brief,
                self.task.system_prompt,
                self._purpose_chat("base", t),
                config.parse_attempts,
            )
            if program is not None:
                description = describe_program(
                    program, self.task.brief, self._purpose_chat("describe", t)
                )
                produced_by = "base_fallback"

        if program is None:
            self._append_trajectory(t, None, ROUTE_SKIPPED)
            self._write_state()
            return

        try:
            result = self._evaluate(program)
        except Exception:  # executor/protocol failure, not a verdict
            self._append_trajectory(t, None, ROUTE_SKIPPED)
            self._write_state()
            return
        if not result.ok:
            self._append_trajectory(t, None, ROUTE_SKIPPED)
            self._write_state()
            return

        embedding = self._embed(t, description)
        entry = ArchiveEntry(
            id=self.next_entry_id,
            parent_id=parent.id,
            generation=t,
            program_source=program,
            fitness=result.fitness,
            strategy_description=description,
            strategy_embedding=embedding.vector,
            behavior_vector=result.behavior_vector,
            produced_by=produced_by,
            cost=self._entry_cost,
        )
        self.next_entry_id += 1
        self.archive.insert(entry)
        if self.rundir is not None:
            self.rundir.append_entry(entry)
        self._append_trajectory(t, result.fitness, route)
        self._write_state()

    def _append_trajectory(
        self, t: int, fitness: float | None, route: str, count_route: bool = True
    ) -> None:
        if count_route:
            self.route_counts[route] += 1
        row = TrajectoryRow(
            generation=t,
            fitness=fitness,
            best_so_far=self.archive.best().fitness,
            cumulative_cost_usd=self.cost_usd,
            route=route,
            guidance_gen=None if self.guidance is None else self.guidance.refreshed_at,
        )
        self.trajectory.append(row)
        if self.rundir is not None:
            self.rundir.append_trajectory(row)

    def run_generations(self, stop_after: int | None = None) -> None:
        """Advance to generation T, or to ``stop_after`` (flushing a
        resumable state, like any other mid-run halt).

        Provider exhaustion halts the run instead of crashing it: the state
        flushed after the last finished generation stays valid for resume.
        """
        last = self.config.total_generations
        if stop_after is not None:
            last = min(last, stop_after)
        for t in range(self.next_generation, last + 1):
            self.next_generation = t + 1
            try:
                self.step(t)
            except (ProviderExhausted, ScenarioExhausted) as exc:
                self.next_generation = t
                self.halted_reason = str(exc)
                return
        if self.next_generation > self.config.total_generations:
            self.completed = True
            self._write_state()
            self._write_summary()

    def _write_summary(self) -> None:
        if self.rundir is None:
            return
        best = self.archive.best()
        self.rundir.write_summary(
            {
                "task": self.task.task_id,
                "best_fitness": best.fitness,
                "best_id": best.id,
                "generations_to_best": best.generation,
                "reference": self.task.reference,
                "total_generations": self.config.total_generations,
                "total_cost_usd": self.cost_usd,
                "chat_calls": self.chat_calls,
                "embedding_calls": self.embedding_calls,
                "wall_s": self.wall_s(),
                "completed": self.completed,
            }
        )

    def result(self) -> RunResult:
        return RunResult(
            best=self.archive.best(),
            trajectory=self.trajectory,
            totals=Totals(
                chat_calls=self.chat_calls,
                embedding_calls=self.embedding_calls,
                cost_usd=self.cost_usd,
                wall_s=self.wall_s(),
            ),
            archive=self.archive,
            transcript=self.transcript,
            guidance_log=self.guidance_log,
            completed=self.completed,
            resumed_from=self.resumed_from,
            halted_reason=self.halted_reason,
        )


def run(
    config: RunConfig,
    task: Task | None = None,
    providers: Providers | None = None,
    executor=None,
    stop_after: int | None = None,
) -> RunResult:
    """Execute a fresh run; writes a run directory when one is configured."""
    task = task or build_task(config.task_id, config.task_params)
    providers = providers or build_providers(config.providers)
    executor = executor or make_executor(config)
    rundir = None
    if config.output_dir is not None:
        rundir = RunDirectory.create(config.output_dir, config.to_dict())
    engine = EvolutionEngine(config, task, providers, executor, rundir)
    if rundir is not None:
        rundir.acquire_lock()
    try:
        engine.bootstrap()
        engine.run_generations(stop_after)
    finally:
        if rundir is not None:
            rundir.release_lock()
    return engine.result()


def _truncate_to_lines(path: str, keep: int) -> None:
    if not os.path.exists(path):
        return
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if len(lines) > keep:
        with open(path, "w", encoding="utf-8") as fh:
            fh.writelines(lines[:keep])


def _discard_inflight_log_tails(rundir: RunDirectory, state: dict) -> None:
    """Drop log lines written by a generation that never reached its state
    flush (hard kill mid-step), restoring log/state consistency.

    Entry ids are consecutive, so the archive log must hold exactly
    ``next_entry_id`` lines; the trajectory holds the seed row plus one row
    per finished generation; guidance and transcript lengths are recorded in
    the state directly.
    """
    _truncate_to_lines(rundir.archive_path, int(state["next_entry_id"]))
    _truncate_to_lines(rundir.trajectory_path, 1 + int(state["next_generation"]))
    _truncate_to_lines(rundir.guidance_path, int(state["guidance_count"]))
    _truncate_to_lines(rundir.transcript_path, int(state["transcript_index"]))


def resume_run(
    run_dir: str,
    stop_after: int | None = None,
    providers: Providers | None = None,
    executor=None,
) -> RunResult:
    """Continue an interrupted run from its persisted state.

    The archive is replayed from the log, the RNG stream is repositioned at
    the recorded draw counter, and the mock scenario cursor (when mocks are
    in use) is restored, so the continued logs are byte-identical to an
    uninterrupted run's.
    """
    rundir = RunDirectory.open_existing(run_dir)
    header = rundir.verify_header()
    config = RunConfig.from_dict(header["config"])
    state = rundir.read_state()
    if not state["completed"]:
        _discard_inflight_log_tails(rundir, state)

    task = build_task(config.task_id, config.task_params)
    providers = providers or build_providers(config.providers)
    executor = executor or make_executor(config)
    engine = EvolutionEngine(config, task, providers, executor, rundir)
    engine.resumed_from = int(state["next_generation"])
    if state["completed"]:
        engine.completed = True

    from .archive import load_run

    engine.archive = load_run(rundir.archive_path, config.capacity)
    engine.rng = CountingRng(config.seed, position=int(state["rng_position"]))
    engine.next_entry_id = int(state["next_entry_id"])
    engine.next_generation = int(state["next_generation"])
    engine.chat_calls = int(state["chat_calls"])
    engine.embedding_calls = int(state["embedding_calls"])
    engine.cost_usd = float(state["cost_usd"])
    engine.transcript_index = int(state["transcript_index"])
    engine.route_counts.update(state["route_counts"])
    engine._wall_prior = float(state.get("wall_s", 0.0))
    if state["guidance"] is not None:
        engine.guidance = LandscapeGuidance.from_dict(state["guidance"])
    engine.guidance_log = rundir.read_guidance_log()
    engine.trajectory = rundir.read_trajectory()
    if state["mock_chat_consumed"] is not None and isinstance(
        engine.providers.chat, MockChatProvider
    ):
        engine.providers.chat.restore(state["mock_chat_consumed"])

    if engine.completed:
        return engine.result()
    rundir.acquire_lock()
    try:
        engine.run_generations(stop_after)
    finally:
        rundir.release_lock()
    return engine.result()
