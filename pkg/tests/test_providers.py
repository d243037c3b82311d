from __future__ import annotations

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

import stratevo.providers as providers_mod
from stratevo.providers import (
    ChatEndpointConfig,
    EmbeddingEndpointConfig,
    HashEmbeddingProvider,
    HttpChatProvider,
    HttpEmbeddingProvider,
    MockChatProvider,
    MockScript,
    ProviderError,
    ProviderExhausted,
    ScenarioExhausted,
    classify_prompt,
)


class _ScriptedHandler(BaseHTTPRequestHandler):
    """Replays a fixed list of (status, body) responses."""

    responses: list[tuple[int, dict]] = []
    cursor = 0
    seen_payloads: list[dict] = []

    def do_POST(self):  # noqa: N802 (http.server API)
        cls = type(self)
        length = int(self.headers.get("Content-Length", 0))
        cls.seen_payloads.append(json.loads(self.rfile.read(length)))
        status, body = cls.responses[min(cls.cursor, len(cls.responses) - 1)]
        cls.cursor += 1
        payload = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # silence test output
        pass


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ScriptedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _ScriptedHandler.cursor = 0
    _ScriptedHandler.seen_payloads = []
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def chat_body(text: str) -> dict:
    return {
        "choices": [{"message": {"content": text}}],
        "usage": {"prompt_tokens": 10, "completion_tokens": 5},
    }


class TestHttpChat:
    def test_two_429s_then_success_records_retries(self, stub_server) -> None:
        _ScriptedHandler.responses = [(429, {}), (429, {}), (200, chat_body("hello"))]
        provider = HttpChatProvider(
            ChatEndpointConfig(
                base_url=stub_server,
                price_input_per_token=0.001,
                price_output_per_token=0.002,
            ),
            retry_budget=3,
            backoff_s=0.0,
        )
        exchange = provider.complete("sys", "user")
        assert exchange.response_text == "hello"
        assert exchange.retries == 2
        assert exchange.prompt_tokens == 10
        assert exchange.cost_usd == 10 * 0.001 + 5 * 0.002

    def test_budget_one_with_persistent_500_exhausts(self, stub_server) -> None:
        _ScriptedHandler.responses = [(500, {})]
        provider = HttpChatProvider(
            ChatEndpointConfig(base_url=stub_server), retry_budget=1, backoff_s=0.0
        )
        with pytest.raises(ProviderExhausted) as info:
            provider.complete("sys", "user")
        assert info.value.last_status == 500
        assert info.value.attempts == 2

    def test_non_retryable_4xx_is_an_error(self, stub_server) -> None:
        _ScriptedHandler.responses = [(401, {})]
        provider = HttpChatProvider(
            ChatEndpointConfig(base_url=stub_server), retry_budget=2, backoff_s=0.0
        )
        with pytest.raises(ProviderError):
            provider.complete("sys", "user")

    def test_request_payload_shape(self, stub_server) -> None:
        _ScriptedHandler.responses = [(200, chat_body("ok"))]
        provider = HttpChatProvider(
            ChatEndpointConfig(base_url=stub_server, model="test-model"),
            backoff_s=0.0,
        )
        provider.complete("the system", "the user")
        payload = _ScriptedHandler.seen_payloads[-1]
        assert payload["model"] == "test-model"
        assert payload["messages"][0] == {"role": "system", "content": "the system"}
        assert payload["messages"][1] == {"role": "user", "content": "the user"}


class TestHttpEmbedding:
    def test_vector_is_normalized_and_dim_checked(self, stub_server) -> None:
        _ScriptedHandler.responses = [
            (200, {"data": [{"embedding": [3.0, 4.0]}], "usage": {"prompt_tokens": 7}})
        ]
        provider = HttpEmbeddingProvider(
            EmbeddingEndpointConfig(base_url=stub_server, dim=2, price_per_token=0.5),
            backoff_s=0.0,
        )
        result = provider.embed("text")
        assert result.vector == [0.6, 0.8]
        assert result.tokens == 7
        assert result.cost_usd == 3.5

    def test_wrong_dimension_rejected(self, stub_server) -> None:
        _ScriptedHandler.responses = [
            (200, {"data": [{"embedding": [1.0, 0.0, 0.0]}], "usage": {}})
        ]
        provider = HttpEmbeddingProvider(
            EmbeddingEndpointConfig(base_url=stub_server, dim=2), backoff_s=0.0
        )
        with pytest.raises(ProviderError):
            provider.embed("text")


class TestClassifier:
    def test_markers_route_each_prompt_kind(self) -> None:
        assert classify_prompt("... ```EFFECTIVE ...") == "sln"
        assert classify_prompt("... ```DIAGNOSIS ... ```PROGRAM ...") == "sa"
        assert classify_prompt("... ```PROGRAM ...") == "base"
        assert classify_prompt("summarize this ```python\nx\n```") == "describe"


class TestMockChat:
    def test_steps_replay_in_order_then_exhaust(self) -> None:
        script = MockScript(
            steps={"describe": ["one", "two", "three", "four", "five"]}, fill="error"
        )
        chat = MockChatProvider(script)
        replies = [chat.complete("s", "plain prompt").response_text for _ in range(5)]
        assert replies == ["one", "two", "three", "four", "five"]
        with pytest.raises(ScenarioExhausted) as info:
            chat.complete("s", "plain prompt")
        assert "5 scripted step(s)" in str(info.value)
        assert "call index 5" in str(info.value)

    def test_kinds_consume_independent_queues(self) -> None:
        script = MockScript(
            steps={"describe": ["d0"], "base": ["```PROGRAM\np\n```"]}, fill="error"
        )
        chat = MockChatProvider(script)
        assert chat.complete("s", "improve ```PROGRAM now").response_text.startswith(
            "```PROGRAM"
        )
        assert chat.complete("s", "plain").response_text == "d0"

    def test_synth_fill_echoes_parent_program(self) -> None:
        chat = MockChatProvider()
        user = "brief\n```python\ndef f():\n    return 3\n```\nreply ```PROGRAM"
        text = chat.complete("s", user).response_text
        assert "def f():\n    return 3" in text

    def test_cost_accounting_uses_price_table(self) -> None:
        chat = MockChatProvider(
            price_input_per_token=0.01, price_output_per_token=0.1
        )
        exchange = chat.complete("sys", "x" * 40)
        assert exchange.cost_usd == pytest.approx(
            exchange.prompt_tokens * 0.01 + exchange.completion_tokens * 0.1
        )

    def test_restore_resumes_scenario_position(self) -> None:
        script = MockScript(steps={"describe": ["a", "b", "c"]}, fill="error")
        first = MockChatProvider(script)
        first.complete("s", "p")
        snapshot = dict(first.consumed)

        second = MockChatProvider(MockScript(steps={"describe": ["a", "b", "c"]}, fill="error"))
        second.restore(snapshot)
        assert second.complete("s", "p").response_text == "b"


class TestHashEmbedding:
    def test_identical_texts_identical_vectors(self) -> None:
        provider = HashEmbeddingProvider(dim=16, seed=1)
        assert provider.embed("same text").vector == provider.embed("same text").vector

    def test_fixture_pair_differs(self) -> None:
        provider = HashEmbeddingProvider(dim=16, seed=1)
        a = provider.embed("hexagonal lattice with boundary ring")
        b = provider.embed("simulated annealing over random restarts")
        assert a.vector != b.vector

    def test_norm_is_unit(self) -> None:
        provider = HashEmbeddingProvider(dim=8, seed=3)
        for text in ("a", "some words", "!!!", "9 8 7"):
            norm = math.sqrt(sum(x * x for x in provider.embed(text).vector))
            assert abs(norm - 1.0) <= 1e-6

    def test_empty_text_rejected(self) -> None:
        with pytest.raises(ProviderError):
            HashEmbeddingProvider(dim=8).embed("")


def test_mock_run_makes_zero_network_calls() -> None:
    from stratevo.config import RunConfig
    from stratevo.engine import run

    before = providers_mod.NETWORK_CALLS
    result = run(RunConfig(task_id="int_sequences", total_generations=20, seed=5))
    assert result.totals.chat_calls > 20
    assert providers_mod.NETWORK_CALLS == before
