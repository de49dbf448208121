"""Small shared helpers: canonical JSON, hashing, clocks, packaged data."""
from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from importlib import resources
from typing import Any, Callable

Clock = Callable[[], str]


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def fixed_clock(at: str) -> Clock:
    return lambda: at


def canonical_json(obj: Any) -> str:
    """Stable rendering used for every persisted document: sorted keys, 2-space indent."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def canonical_json_bytes(obj: Any) -> bytes:
    return canonical_json(obj).encode("utf-8")


def content_hash(obj: Any) -> str:
    """sha256 over the compact sorted-key JSON encoding of ``obj``."""
    compact = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return "sha256:" + hashlib.sha256(compact.encode("utf-8")).hexdigest()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def stable_rank(material: str) -> str:
    """Deterministic pseudo-random rank token; uniform via the hash, stable across runs."""
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def load_packaged_json(name: str) -> Any:
    """Read a JSON data file shipped inside the package (``cardioscribe/data``)."""
    path = resources.files("cardioscribe").joinpath("data").joinpath(name)
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)
