"""Chat-generation abstraction: HTTP chat-completion backends and a scripted mock.

Scripted backends are pure functions of (messages, params) keyed by the
request fingerprint, which makes every pipeline test bit-deterministic.
"""
from __future__ import annotations

import base64
import hashlib
import json
import mimetypes
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping

from .errors import (
    BadStatus,
    ScriptTableMiss,
    Timeout,
    TransportError,
    UnresolvedImage,
    UnsupportedModality,
)


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class AgentRole(str, Enum):
    M2F = "M2F"  # metrics-to-findings
    T2F = "T2F"  # tracings-to-findings
    F2I = "F2I"  # findings-to-interpretation


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    image_ref: str  # "sha256:<hex>" or a file path


Part = TextPart | ImagePart


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    parts: tuple[Part, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("a chat message needs at least one part")

    @classmethod
    def text(cls, role: Role, text: str) -> "ChatMessage":
        return cls(role=role, parts=(TextPart(text),))

    def joined_text(self) -> str:
        return "\n".join(p.text for p in self.parts if isinstance(p, TextPart))

    def has_images(self) -> bool:
        return any(isinstance(p, ImagePart) for p in self.parts)


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be > 0")


ImageLoader = Callable[[str], bytes]


def _default_image_loader(ref: str) -> bytes:
    return Path(ref).read_bytes()


@dataclass(frozen=True)
class BackendHandle:
    kind: str  # "http" | "scripted"
    endpoint_url: str | None = None
    script_table: Mapping[str, str] | None = None
    timeout_ms: int = 30_000
    max_retries: int = 2
    retry_backoff_ms: int = 250
    latency_ms: int = 0  # scripted only; simulates model latency in tests
    image_loader: ImageLoader = field(default=_default_image_loader, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("http", "scripted"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint_url:
            raise ValueError("http backend needs endpoint_url")
        if self.kind == "scripted" and self.script_table is None:
            raise ValueError("scripted backend needs script_table")


@dataclass(frozen=True)
class AgentConfig:
    role: AgentRole
    backend: BackendHandle
    model_name: str
    params: GenerationParams = GenerationParams()
    vision: bool = False

    def __post_init__(self):
        if self.role is AgentRole.T2F and not self.vision:
            raise ValueError("the tracings agent requires a vision-capable backend")


_image_hash_cache: dict[str, str] = {}


def _image_hash(ref: str, loader: ImageLoader = _default_image_loader) -> str:
    """Content hash for an image part; path refs are hashed by file bytes."""
    if ref.startswith("sha256:"):
        return ref
    cached = _image_hash_cache.get(ref)
    if cached is not None:
        return cached
    digest = "sha256:" + hashlib.sha256(loader(ref)).hexdigest()
    _image_hash_cache[ref] = digest
    return digest


def fingerprint(messages: list[ChatMessage], params: GenerationParams) -> str:
    """Stable content hash over roles, text parts, image hashes, and params."""
    payload = {
        "messages": [
            {
                "role": m.role.value,
                "parts": [
                    {"text": p.text} if isinstance(p, TextPart) else {"image": _image_hash(p.image_ref)}
                    for p in m.parts
                ],
            }
            for m in messages
        ],
        "params": {
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "seed": params.seed,
        },
    }
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()


def _wire_content(message: ChatMessage, loader: ImageLoader) -> str | list[dict]:
    if not message.has_images():
        return message.joined_text()
    parts: list[dict] = []
    for part in message.parts:
        if isinstance(part, TextPart):
            parts.append({"type": "text", "text": part.text})
        else:
            try:
                data = loader(part.image_ref)
            except OSError as exc:
                raise UnresolvedImage(f"cannot load image {part.image_ref}: {exc}") from exc
            mime = mimetypes.guess_type(part.image_ref)[0] or "image/png"
            encoded = base64.b64encode(data).decode("ascii")
            parts.append({"type": "image_url", "image_url": {"url": f"data:{mime};base64,{encoded}"}})
    return parts


def _generate_http(config: AgentConfig, messages: list[ChatMessage]) -> str:
    import httpx  # deferred: scripted-only runs never pay the import

    backend = config.backend
    body: dict = {
        "model": config.model_name,
        "messages": [
            {"role": m.role.value, "content": _wire_content(m, backend.image_loader)} for m in messages
        ],
        "temperature": config.params.temperature,
        "max_tokens": config.params.max_tokens,
    }
    if config.params.seed is not None:
        body["seed"] = config.params.seed
    # Credentials come from the environment only; they are never persisted.
    headers = {}
    api_key = os.environ.get("CARDIOSCRIBE_API_KEY")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    timeout = backend.timeout_ms / 1000.0
    attempts = backend.max_retries + 1
    last_error: Exception | None = None
    timed_out = False
    for attempt in range(1, attempts + 1):
        try:
            response = httpx.post(backend.endpoint_url, json=body, headers=headers, timeout=timeout)
        except httpx.TimeoutException as exc:
            last_error, timed_out = exc, True
        except httpx.HTTPError as exc:
            last_error, timed_out = exc, False
        else:
            if response.status_code < 400:
                try:
                    return response.json()["choices"][0]["message"]["content"]
                except (KeyError, IndexError, ValueError) as exc:
                    raise BadStatus(response.status_code, f"malformed completion body: {exc}") from exc
            if 400 <= response.status_code < 500:
                # Client errors will not heal; do not retry.
                raise BadStatus(response.status_code, response.text)
            last_error, timed_out = BadStatus(response.status_code, response.text), False
        if attempt < attempts:
            time.sleep(backend.retry_backoff_ms / 1000.0 * 2 ** (attempt - 1))
    if timed_out:
        raise Timeout(f"timed out after {attempts} attempts: {last_error}", attempts=attempts)
    if isinstance(last_error, BadStatus):
        raise last_error
    raise TransportError(f"transport failed after {attempts} attempts: {last_error}", attempts=attempts)


def generate(config: AgentConfig, messages: list[ChatMessage]) -> str:
    """Run one completion. Raw text back; retries are the backend's concern."""
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role is not Role.SYSTEM:
        raise ValueError("first message must have role system")
    if any(m.has_images() for m in messages) and not config.vision:
        raise UnsupportedModality(
            f"backend for {config.role.value} has no vision capability but got image parts"
        )

    if config.backend.kind == "scripted":
        if config.backend.latency_ms:
            time.sleep(config.backend.latency_ms / 1000.0)
        key = fingerprint(messages, config.params)
        table = config.backend.script_table or {}
        if key not in table:
            raise ScriptTableMiss(f"no scripted completion for fingerprint {key}")
        return table[key]
    return _generate_http(config, messages)
