"""Run configuration: defaults, JSON parsing, and strict validation.

A config document is a single JSON object; omitted fields take the defaults
below (the search hyperparameters default to the reported operating point:
100 generations, refresh interval 10, 5 clusters, exploration 0.2).
Validation collects every field-level problem instead of stopping at the
first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Any

from .providers import ChatEndpointConfig, EmbeddingEndpointConfig

EVAL_MODES = ("auto", "inprocess", "runner")
PROVIDER_MODES = ("mock", "http")


class ConfigError(Exception):
    """One or more invalid config fields."""

    def __init__(self, problems: list[str]) -> None:
        super().__init__("invalid config:\n" + "\n".join(f"- {p}" for p in problems))
        self.problems = problems


@dataclass
class ProvidersConfig:
    mode: str = "mock"
    chat: ChatEndpointConfig = dc_field(default_factory=ChatEndpointConfig)
    embedding: EmbeddingEndpointConfig = dc_field(
        default_factory=EmbeddingEndpointConfig
    )
    retry_budget: int = 3
    timeout_s: float = 60.0
    backoff_s: float = 0.5
    mock_embedding_dim: int = 32
    mock_embedding_seed: int = 0
    mock_scenario_path: str | None = None


@dataclass
class RunConfig:
    """All knobs for one run; defaults cover everything but the task."""

    task_id: str = "square_packing"
    task_params: dict[str, Any] = dc_field(default_factory=dict)
    total_generations: int = 100
    warmup: int = 10
    sln_interval: int = 10
    clusters: int = 5
    exploration: float = 0.2
    capacity: int = 100
    seed: int = 0
    providers: ProvidersConfig = dc_field(default_factory=ProvidersConfig)
    output_dir: str | None = None
    sln_entry_cap: int = 200
    parse_attempts: int = 2
    eval_timeout_s: float = 20.0
    eval_mode: str = "auto"
    runner_cmd: list[str] | None = None

    def validate(self) -> None:
        problems: list[str] = []
        if self.total_generations < 1:
            problems.append(
                f"total_generations: must be >= 1, got {self.total_generations}"
            )
        if self.warmup < 0:
            problems.append(f"warmup: must be >= 0, got {self.warmup}")
        if self.sln_interval < 1:
            problems.append(f"sln_interval: must be >= 1, got {self.sln_interval}")
        if self.clusters < 1:
            problems.append(f"clusters: must be >= 1, got {self.clusters}")
        if not 0.0 <= self.exploration <= 1.0:
            problems.append(
                f"exploration: must be within [0, 1], got {self.exploration}"
            )
        if self.capacity < 2:
            problems.append(f"capacity: must be >= 2, got {self.capacity}")
        if self.sln_entry_cap < 1:
            problems.append(f"sln_entry_cap: must be >= 1, got {self.sln_entry_cap}")
        if self.parse_attempts < 1:
            problems.append(f"parse_attempts: must be >= 1, got {self.parse_attempts}")
        if self.eval_timeout_s <= 0:
            problems.append(f"eval_timeout_s: must be > 0, got {self.eval_timeout_s}")
        if self.eval_mode not in EVAL_MODES:
            problems.append(f"eval_mode: must be one of {EVAL_MODES}, got {self.eval_mode!r}")
        if self.providers.mode not in PROVIDER_MODES:
            problems.append(
                f"providers.mode: must be one of {PROVIDER_MODES}, "
                f"got {self.providers.mode!r}"
            )
        if self.providers.retry_budget < 0:
            problems.append(
                f"providers.retry_budget: must be >= 0, got {self.providers.retry_budget}"
            )
        if self.providers.mock_embedding_dim < 2:
            problems.append(
                "providers.mock_embedding_dim: must be >= 2, got "
                f"{self.providers.mock_embedding_dim}"
            )
        from .tasks import TaskError, build_task

        try:
            build_task(self.task_id, self.task_params)
        except (TaskError, ValueError, TypeError) as exc:
            problems.append(f"task: {exc}")
        if problems:
            raise ConfigError(problems)

    def to_dict(self) -> dict[str, Any]:
        """Fully materialized config (all defaults applied), for the header."""
        chat = self.providers.chat
        emb = self.providers.embedding
        return {
            "task": {"id": self.task_id, "params": dict(self.task_params)},
            "total_generations": self.total_generations,
            "warmup": self.warmup,
            "sln_interval": self.sln_interval,
            "clusters": self.clusters,
            "exploration": self.exploration,
            "capacity": self.capacity,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "sln_entry_cap": self.sln_entry_cap,
            "parse_attempts": self.parse_attempts,
            "evaluation": {
                "mode": self.eval_mode,
                "timeout_s": self.eval_timeout_s,
                "runner_cmd": self.runner_cmd,
            },
            "providers": {
                "mode": self.providers.mode,
                "retry_budget": self.providers.retry_budget,
                "timeout_s": self.providers.timeout_s,
                "backoff_s": self.providers.backoff_s,
                "chat": {
                    "base_url": chat.base_url,
                    "api_key_env": chat.api_key_env,
                    "model": chat.model,
                    "temperature": chat.temperature,
                    "max_output_tokens": chat.max_output_tokens,
                    "price_input_per_token": chat.price_input_per_token,
                    "price_output_per_token": chat.price_output_per_token,
                },
                "embedding": {
                    "base_url": emb.base_url,
                    "api_key_env": emb.api_key_env,
                    "model": emb.model,
                    "dim": emb.dim,
                    "price_per_token": emb.price_per_token,
                },
                "mock": {
                    "embedding_dim": self.providers.mock_embedding_dim,
                    "embedding_seed": self.providers.mock_embedding_seed,
                    "scenario_path": self.providers.mock_scenario_path,
                },
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        """Build and validate a config from a parsed JSON document."""
        problems: list[str] = []

        def take(container: dict, key: str, default: Any) -> Any:
            return container.get(key, default)

        task = take(data, "task", {})
        providers_data = take(data, "providers", {})
        chat_data = take(providers_data, "chat", {})
        emb_data = take(providers_data, "embedding", {})
        mock_data = take(providers_data, "mock", {})
        eval_data = take(data, "evaluation", {})

        known_top = {
            "task", "total_generations", "warmup", "sln_interval", "clusters",
            "exploration", "capacity", "seed", "output_dir", "sln_entry_cap",
            "parse_attempts", "evaluation", "providers",
        }
        for key in data:
            if key not in known_top:
                problems.append(f"{key}: unknown field")
        if problems:
            raise ConfigError(problems)

        chat_defaults = ChatEndpointConfig()
        emb_defaults = EmbeddingEndpointConfig()
        providers = ProvidersConfig(
            mode=take(providers_data, "mode", "mock"),
            chat=ChatEndpointConfig(
                base_url=take(chat_data, "base_url", chat_defaults.base_url),
                api_key_env=take(chat_data, "api_key_env", chat_defaults.api_key_env),
                model=take(chat_data, "model", chat_defaults.model),
                temperature=float(
                    take(chat_data, "temperature", chat_defaults.temperature)
                ),
                max_output_tokens=int(
                    take(chat_data, "max_output_tokens", chat_defaults.max_output_tokens)
                ),
                price_input_per_token=float(
                    take(chat_data, "price_input_per_token", 0.0)
                ),
                price_output_per_token=float(
                    take(chat_data, "price_output_per_token", 0.0)
                ),
            ),
            embedding=EmbeddingEndpointConfig(
                base_url=take(emb_data, "base_url", emb_defaults.base_url),
                api_key_env=take(emb_data, "api_key_env", emb_defaults.api_key_env),
                model=take(emb_data, "model", emb_defaults.model),
                dim=int(take(emb_data, "dim", emb_defaults.dim)),
                price_per_token=float(take(emb_data, "price_per_token", 0.0)),
            ),
            retry_budget=int(take(providers_data, "retry_budget", 3)),
            timeout_s=float(take(providers_data, "timeout_s", 60.0)),
            backoff_s=float(take(providers_data, "backoff_s", 0.5)),
            mock_embedding_dim=int(take(mock_data, "embedding_dim", 32)),
            mock_embedding_seed=int(take(mock_data, "embedding_seed", 0)),
            mock_scenario_path=take(mock_data, "scenario_path", None),
        )
        config = cls(
            task_id=take(task, "id", "square_packing"),
            task_params=dict(take(task, "params", {})),
            total_generations=int(take(data, "total_generations", 100)),
            warmup=int(take(data, "warmup", 10)),
            sln_interval=int(take(data, "sln_interval", 10)),
            clusters=int(take(data, "clusters", 5)),
            exploration=float(take(data, "exploration", 0.2)),
            capacity=int(take(data, "capacity", 100)),
            seed=int(take(data, "seed", 0)),
            providers=providers,
            output_dir=take(data, "output_dir", None),
            sln_entry_cap=int(take(data, "sln_entry_cap", 200)),
            parse_attempts=int(take(data, "parse_attempts", 2)),
            eval_timeout_s=float(take(eval_data, "timeout_s", 20.0)),
            eval_mode=take(eval_data, "mode", "auto"),
            runner_cmd=take(eval_data, "runner_cmd", None),
        )
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError(["config must be a JSON object"])
        return cls.from_dict(data)
