"""Chat and embedding providers behind narrow contracts.

Two transports share one interface: real OpenAI-compatible HTTP endpoints
(with bounded exponential-backoff retries and per-token cost accounting) and
deterministic mocks for desk-scale runs. The mock chat provider classifies
each prompt by the fenced-tag markers the prompt templates embed and replays
a scripted scenario per prompt kind; the mock embedder hashes token n-grams
into a unit vector. Every successful call is accounted exactly once.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from typing import Any

import httpx
import numpy as np

from .articulation import render_sa_response, SaResponse
from .navigation import render_guidance_response

# Count of real HTTP requests issued by this process; mocks never touch it.
NETWORK_CALLS = 0

KIND_SA = "sa"
KIND_SLN = "sln"
KIND_BASE = "base"
KIND_DESCRIBE = "describe"
PROMPT_KINDS = (KIND_SA, KIND_SLN, KIND_BASE, KIND_DESCRIBE)


class ProviderError(Exception):
    """Unrecoverable provider-layer failure."""


class ProviderExhausted(ProviderError):
    """Retry budget spent without a successful exchange."""

    def __init__(self, message: str, last_status: int | None, attempts: int) -> None:
        super().__init__(message)
        self.last_status = last_status
        self.attempts = attempts


class ScenarioExhausted(ProviderError):
    """A scripted mock ran out of steps for a prompt kind."""


@dataclass
class ChatEndpointConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    model: str = "gpt-4o-mini"
    temperature: float = 0.7
    max_output_tokens: int = 4096
    price_input_per_token: float = 0.0
    price_output_per_token: float = 0.0


@dataclass
class EmbeddingEndpointConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    model: str = "text-embedding-3-small"
    dim: int = 1536
    price_per_token: float = 0.0


@dataclass
class ChatRequest:
    system: str
    user: str
    model: str
    temperature: float
    max_output_tokens: int


@dataclass
class ChatExchange:
    request: ChatRequest
    response_text: str
    prompt_tokens: int
    completion_tokens: int
    latency_s: float
    cost_usd: float
    retries: int = 0


@dataclass
class EmbeddingResult:
    vector: list[float]
    tokens: int
    cost_usd: float


def _approx_tokens(text: str) -> int:
    return max(1, len(text) // 4)


def _normalized(vector: np.ndarray) -> list[float]:
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise ProviderError("embedding endpoint returned a zero vector")
    return [float(x) for x in vector / norm]


def _retrying_post(
    client_kwargs: dict[str, Any],
    url: str,
    payload: dict[str, Any],
    headers: dict[str, str],
    retry_budget: int,
    backoff_s: float,
) -> tuple[dict[str, Any], int]:
    """POST with exponential backoff on transport errors, 429 and 5xx.

    Returns (response json, retries used). Raises ProviderExhausted when the
    budget is spent.
    """
    global NETWORK_CALLS
    last_status: int | None = None
    last_error = ""
    attempts = 0
    for attempt in range(retry_budget + 1):
        attempts += 1
        if attempt > 0 and backoff_s > 0:
            time.sleep(backoff_s * (2 ** (attempt - 1)))
        try:
            NETWORK_CALLS += 1
            with httpx.Client(**client_kwargs) as client:
                response = client.post(url, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            last_status = None
            last_error = str(exc)
            continue
        if response.status_code == 429 or response.status_code >= 500:
            last_status = response.status_code
            last_error = response.text[:200]
            continue
        if response.status_code != 200:
            raise ProviderError(
                f"{url} returned {response.status_code}: {response.text[:200]}"
            )
        return response.json(), attempts - 1
    raise ProviderExhausted(
        f"{url} failed after {attempts} attempt(s); "
        f"last status {last_status}: {last_error}",
        last_status=last_status,
        attempts=attempts,
    )


def _auth_headers(api_key_env: str) -> dict[str, str]:
    key = os.environ.get(api_key_env, "")
    return {"Authorization": f"Bearer {key}"} if key else {}


class HttpChatProvider:
    """OpenAI-compatible /chat/completions client."""

    def __init__(
        self,
        config: ChatEndpointConfig,
        retry_budget: int = 3,
        timeout_s: float = 60.0,
        backoff_s: float = 0.5,
    ) -> None:
        self.config = config
        self.retry_budget = retry_budget
        self.timeout_s = timeout_s
        self.backoff_s = backoff_s

    def complete(self, system: str, user: str) -> ChatExchange:
        cfg = self.config
        request = ChatRequest(
            system=system,
            user=user,
            model=cfg.model,
            temperature=cfg.temperature,
            max_output_tokens=cfg.max_output_tokens,
        )
        payload = {
            "model": cfg.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        }
        start = time.monotonic()
        body, retries = _retrying_post(
            {"timeout": self.timeout_s},
            cfg.base_url.rstrip("/") + "/chat/completions",
            payload,
            _auth_headers(cfg.api_key_env),
            self.retry_budget,
            self.backoff_s,
        )
        latency = time.monotonic() - start
        try:
            text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat completion body: {exc}") from exc
        usage = body.get("usage") or {}
        prompt_tokens = int(usage.get("prompt_tokens", _approx_tokens(system + user)))
        completion_tokens = int(usage.get("completion_tokens", _approx_tokens(text)))
        return ChatExchange(
            request=request,
            response_text=text,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            latency_s=latency,
            cost_usd=prompt_tokens * cfg.price_input_per_token
            + completion_tokens * cfg.price_output_per_token,
            retries=retries,
        )


class HttpEmbeddingProvider:
    """OpenAI-compatible /embeddings client; vectors are L2-normalized."""

    def __init__(
        self,
        config: EmbeddingEndpointConfig,
        retry_budget: int = 3,
        timeout_s: float = 60.0,
        backoff_s: float = 0.5,
    ) -> None:
        self.config = config
        self.retry_budget = retry_budget
        self.timeout_s = timeout_s
        self.backoff_s = backoff_s

    def embed(self, text: str) -> EmbeddingResult:
        if not text:
            raise ProviderError("cannot embed empty text")
        cfg = self.config
        body, _ = _retrying_post(
            {"timeout": self.timeout_s},
            cfg.base_url.rstrip("/") + "/embeddings",
            {"model": cfg.model, "input": text},
            _auth_headers(cfg.api_key_env),
            self.retry_budget,
            self.backoff_s,
        )
        try:
            vector = np.asarray(body["data"][0]["embedding"], dtype=float)
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed embedding body: {exc}") from exc
        if vector.shape != (cfg.dim,):
            raise ProviderError(
                f"embedding dimension {vector.shape} != configured ({cfg.dim},)"
            )
        usage = body.get("usage") or {}
        tokens = int(usage.get("prompt_tokens", _approx_tokens(text)))
        return EmbeddingResult(
            vector=_normalized(vector),
            tokens=tokens,
            cost_usd=tokens * cfg.price_per_token,
        )


def classify_prompt(user_text: str) -> str:
    """Map a prompt to its kind via the output-format markers it embeds."""
    if "```EFFECTIVE" in user_text:
        return KIND_SLN
    if "```DIAGNOSIS" in user_text:
        return KIND_SA
    if "```PROGRAM" in user_text:
        return KIND_BASE
    return KIND_DESCRIBE


@dataclass
class MockScript:
    """Per-kind response queues; ``fill`` governs behavior after exhaustion.

    ``fill="synth"`` keeps producing deterministic well-formed responses,
    ``fill="error"`` raises :class:`ScenarioExhausted`.
    """

    steps: dict[str, list[str]] = field(default_factory=dict)
    fill: str = "synth"

    @classmethod
    def from_file(cls, path: str) -> "MockScript":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        steps = {k: list(v) for k, v in data.get("steps", {}).items()}
        unknown = set(steps) - set(PROMPT_KINDS)
        if unknown:
            raise ProviderError(f"scenario file has unknown prompt kinds: {unknown}")
        return cls(steps=steps, fill=data.get("fill", "error"))


def _parent_source(user_text: str) -> str:
    match = re.search(r"```python\n(.*?)\n```", user_text, re.DOTALL)
    return match.group(1) if match else "pass"


def synth_response(kind: str, index: int, user_text: str) -> str:
    """Deterministic filler response for a prompt kind.

    SA and base responses echo the parent program found in the prompt, so a
    synth-filled run keeps evaluating successfully without a scenario file.
    """
    if kind == KIND_DESCRIBE:
        return (
            f"Deterministic mock strategy number {index}: keep the current "
            f"construction and adjust detail {index}."
        )
    if kind == KIND_SLN:
        return render_guidance_response(
            effective=f"Mock effective families (refresh {index}).",
            saturated=f"Mock saturated families (refresh {index}).",
            underexplored=f"Mock underexplored directions (refresh {index}).",
            concrete=f"Mock concrete suggestions (refresh {index}).",
        )
    if kind == KIND_SA:
        return render_sa_response(
            SaResponse(
                diagnosis=f"Mock diagnosis number {index}.",
                strategy=f"Mock strategy direction number {index}.",
                program=_parent_source(user_text),
            )
        )
    return f"```PROGRAM\n{_parent_source(user_text)}\n```"


class MockChatProvider:
    """Scripted chat: replays a scenario keyed by prompt classification.

    Consumption counters are exposed (and restorable) so interrupted runs can
    resume mid-scenario deterministically.
    """

    def __init__(
        self,
        script: MockScript | None = None,
        *,
        price_input_per_token: float = 0.0,
        price_output_per_token: float = 0.0,
        model: str = "mock-chat",
    ) -> None:
        self.script = script or MockScript()
        self.price_input_per_token = price_input_per_token
        self.price_output_per_token = price_output_per_token
        self.model = model
        self.consumed: dict[str, int] = {kind: 0 for kind in PROMPT_KINDS}

    def restore(self, consumed: dict[str, int]) -> None:
        for kind in PROMPT_KINDS:
            self.consumed[kind] = int(consumed.get(kind, 0))

    def complete(self, system: str, user: str) -> ChatExchange:
        kind = classify_prompt(user)
        index = self.consumed[kind]
        steps = self.script.steps.get(kind, [])
        if index < len(steps):
            text = steps[index]
        elif self.script.fill == "synth":
            text = synth_response(kind, index, user)
        else:
            raise ScenarioExhausted(
                f"mock chat scenario exhausted for kind {kind!r}: "
                f"{len(steps)} scripted step(s), call index {index} has no step"
            )
        self.consumed[kind] = index + 1
        prompt_tokens = _approx_tokens(system + user)
        completion_tokens = _approx_tokens(text)
        return ChatExchange(
            request=ChatRequest(
                system=system,
                user=user,
                model=self.model,
                temperature=0.0,
                max_output_tokens=0,
            ),
            response_text=text,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            latency_s=0.0,
            cost_usd=prompt_tokens * self.price_input_per_token
            + completion_tokens * self.price_output_per_token,
        )


class HashEmbeddingProvider:
    """Deterministic unit vectors from seeded hashing of word tokens.

    Identical texts map to identical vectors; nothing more is promised about
    the geometry (in particular, near-duplicates are not guaranteed to land
    near each other).
    """

    def __init__(
        self, dim: int = 32, seed: int = 0, price_per_token: float = 0.0
    ) -> None:
        if dim < 2:
            raise ValueError(f"embedding dim must be >= 2, got {dim}")
        self.dim = dim
        self.seed = seed
        self.price_per_token = price_per_token

    def _bucket(self, token: str) -> tuple[int, float]:
        digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
        idx = int.from_bytes(digest[:8], "big") % self.dim
        sign = 1.0 if digest[8] & 1 else -1.0
        return idx, sign

    def embed(self, text: str) -> EmbeddingResult:
        if not text:
            raise ProviderError("cannot embed empty text")
        vector = np.zeros(self.dim)
        tokens = re.findall(r"\w+", text.lower())
        for a, b in zip(["^"] + tokens, tokens + ["$"]):
            idx, sign = self._bucket(f"{a} {b}")
            vector[idx] += sign
        norm = float(np.linalg.norm(vector))
        if norm < 1e-12:
            idx, _ = self._bucket(text)
            vector[idx] = 1.0
        count = _approx_tokens(text)
        return EmbeddingResult(
            vector=_normalized(vector),
            tokens=count,
            cost_usd=count * self.price_per_token,
        )


@dataclass
class Providers:
    chat: Any
    embed: Any
