from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from cardioscribe.agents import (
    AgentConfig,
    AgentRole,
    BackendHandle,
    ChatMessage,
    GenerationParams,
    ImagePart,
    Role,
    TextPart,
    fingerprint,
    generate,
)
from cardioscribe.errors import BadStatus, ScriptTableMiss, TransportError, UnsupportedModality

PARAMS = GenerationParams()

MESSAGES = [
    ChatMessage.text(Role.SYSTEM, "You are a cardiology assistant."),
    ChatMessage.text(Role.USER, "AF Burden: 12 %"),
]


def _scripted(table, role=AgentRole.M2F, vision=False, **kwargs):
    return AgentConfig(
        role=role,
        backend=BackendHandle(kind="scripted", script_table=table, **kwargs),
        model_name="scripted",
        params=PARAMS,
        vision=vision,
    )


# --- fingerprint ---------------------------------------------------------------

def test_fingerprint_deterministic():
    assert fingerprint(MESSAGES, PARAMS) == fingerprint(list(MESSAGES), GenerationParams())


def test_fingerprint_sensitive_to_text():
    changed = [MESSAGES[0], ChatMessage.text(Role.USER, "AF Burden: 13 %")]
    assert fingerprint(MESSAGES, PARAMS) != fingerprint(changed, PARAMS)


def test_fingerprint_sensitive_to_image_hash():
    with_a = [
        MESSAGES[0],
        ChatMessage(Role.USER, (TextPart("caption"), ImagePart("sha256:" + "a" * 64))),
    ]
    with_b = [
        MESSAGES[0],
        ChatMessage(Role.USER, (TextPart("caption"), ImagePart("sha256:" + "b" * 64))),
    ]
    assert fingerprint(with_a, PARAMS) != fingerprint(with_b, PARAMS)


def test_fingerprint_sensitive_to_params():
    assert fingerprint(MESSAGES, PARAMS) != fingerprint(MESSAGES, GenerationParams(seed=1))


# --- scripted backend -----------------------------------------------------------

def test_scripted_lookup_returns_exact_string():
    table = {fingerprint(MESSAGES, PARAMS): "- AF/AFL: not present"}
    assert generate(_scripted(table), MESSAGES) == "- AF/AFL: not present"


def test_scripted_is_referentially_transparent():
    table = {fingerprint(MESSAGES, PARAMS): "output"}
    config = _scripted(table)
    results = {generate(config, MESSAGES) for _ in range(20)}
    assert results == {"output"}


def test_concurrent_generate_on_one_config():
    from concurrent.futures import ThreadPoolExecutor

    table = {fingerprint(MESSAGES, PARAMS): "output"}
    config = _scripted(table)
    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(lambda _: generate(config, MESSAGES), range(32)))
    assert set(results) == {"output"}


def test_scripted_miss_raises():
    with pytest.raises(ScriptTableMiss):
        generate(_scripted({}), MESSAGES)


def test_image_to_non_vision_backend_rejected():
    table = {}
    messages = [
        MESSAGES[0],
        ChatMessage(Role.USER, (TextPart("strip"), ImagePart("sha256:" + "c" * 64))),
    ]
    with pytest.raises(UnsupportedModality):
        generate(_scripted(table, vision=False), messages)


def test_first_message_must_be_system():
    with pytest.raises(ValueError):
        generate(_scripted({}), [ChatMessage.text(Role.USER, "hi")])


def test_t2f_requires_vision():
    with pytest.raises(ValueError):
        _scripted({}, role=AgentRole.T2F, vision=False)


# --- http backend ----------------------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    behaviors: list[tuple[int, dict | str]] = []
    calls = 0

    def do_POST(self):  # noqa: N802
        type(self).calls += 1
        status, body = self.behaviors[min(type(self).calls - 1, len(self.behaviors) - 1)]
        payload = json.dumps(body) if isinstance(body, dict) else body
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload.encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Handler.calls = 0
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()


def _http_config(url, max_retries=2):
    return AgentConfig(
        role=AgentRole.M2F,
        backend=BackendHandle(
            kind="http", endpoint_url=url, timeout_ms=2000, max_retries=max_retries, retry_backoff_ms=5
        ),
        model_name="m",
        params=PARAMS,
    )


def test_http_happy_path(http_server):
    _Handler.behaviors = [(200, {"choices": [{"message": {"content": "Findings:\n- ok"}}]})]
    assert generate(_http_config(http_server), MESSAGES) == "Findings:\n- ok"


def test_http_retries_5xx_then_succeeds(http_server):
    _Handler.behaviors = [
        (500, "boom"),
        (200, {"choices": [{"message": {"content": "recovered"}}]}),
    ]
    assert generate(_http_config(http_server), MESSAGES) == "recovered"
    assert _Handler.calls == 2


def test_http_4xx_is_terminal_no_retry(http_server):
    _Handler.behaviors = [(401, "denied")]
    with pytest.raises(BadStatus) as err:
        generate(_http_config(http_server), MESSAGES)
    assert err.value.code == 401
    assert _Handler.calls == 1


def test_unreachable_endpoint_carries_attempt_count():
    config = AgentConfig(
        role=AgentRole.M2F,
        backend=BackendHandle(
            # Reserved TEST-NET-1 address: connections fail fast.
            kind="http",
            endpoint_url="http://127.0.0.1:1/v1/chat",
            timeout_ms=300,
            max_retries=2,
            retry_backoff_ms=1,
        ),
        model_name="m",
        params=PARAMS,
    )
    with pytest.raises(TransportError) as err:
        generate(config, MESSAGES)
    assert err.value.attempts == 3
