"""Single-node file-backed document store with compare-and-set revisions.

One JSON file per record, written atomically (temp file + rename), so a crash
can never leave a torn document. Writes are serialized per key; readers only
ever see committed revisions.
"""
from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..errors import StoreConflict
from ..util import sha256_hex

_SAFE_KEY_RE = re.compile(r"[^A-Za-z0-9._-]")


def _safe_filename(key: str) -> str:
    cleaned = _SAFE_KEY_RE.sub("_", key)
    if cleaned != key or len(cleaned) > 120:
        cleaned = f"{cleaned[:80]}-{sha256_hex(key.encode())[:16]}"
    return cleaned + ".json"


@dataclass(frozen=True)
class StoreRecord:
    kind: str
    key: str
    revision: int
    doc: Any


class FileStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[tuple[str, str], threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, kind: str, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault((kind, key), threading.Lock())

    def _path(self, kind: str, key: str) -> Path:
        return self.root / kind / _safe_filename(key)

    def get(self, kind: str, key: str) -> StoreRecord | None:
        path = self._path(kind, key)
        try:
            raw = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        payload = json.loads(raw)
        return StoreRecord(kind=kind, key=key, revision=payload["revision"], doc=payload["doc"])

    def put(self, kind: str, key: str, doc: Any, expected_revision: int | None) -> StoreRecord:
        """CAS write: ``expected_revision`` None creates; otherwise must match."""
        with self._lock(kind, key):
            current = self.get(kind, key)
            if expected_revision is None:
                if current is not None:
                    raise StoreConflict(
                        f"{kind}/{key} already exists at revision {current.revision}",
                        expected=None,
                        actual=current.revision,
                    )
                revision = 1
            else:
                if current is None or current.revision != expected_revision:
                    raise StoreConflict(
                        f"{kind}/{key} revision mismatch",
                        expected=expected_revision,
                        actual=current.revision if current else None,
                    )
                revision = expected_revision + 1
            path = self._path(kind, key)
            path.parent.mkdir(parents=True, exist_ok=True)
            payload = json.dumps({"revision": revision, "doc": doc}, ensure_ascii=False, sort_keys=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(payload, encoding="utf-8")
            os.replace(tmp, path)  # atomic on POSIX: readers see old or new, never torn
            return StoreRecord(kind=kind, key=key, revision=revision, doc=doc)

    def upsert(self, kind: str, key: str, doc: Any) -> StoreRecord:
        """Last-writer-wins convenience for records without external CAS users."""
        with self._lock(kind, key):
            current = self.get(kind, key)
            revision = 1 if current is None else current.revision + 1
            path = self._path(kind, key)
            path.parent.mkdir(parents=True, exist_ok=True)
            payload = json.dumps({"revision": revision, "doc": doc}, ensure_ascii=False, sort_keys=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(payload, encoding="utf-8")
            os.replace(tmp, path)
            return StoreRecord(kind=kind, key=key, revision=revision, doc=doc)

    def keys(self, kind: str) -> list[str]:
        directory = self.root / kind
        if not directory.is_dir():
            return []
        keys = []
        for path in sorted(directory.glob("*.json")):
            try:
                payload = json.loads(path.read_text(encoding="utf-8"))
            except (json.JSONDecodeError, OSError):
                continue  # ignore files torn by an unrelated writer
            doc = payload.get("doc")
            if isinstance(doc, dict) and "key" in doc:
                keys.append(doc["key"])
            else:
                keys.append(path.stem)
        return keys

    def records(self, kind: str) -> list[StoreRecord]:
        directory = self.root / kind
        if not directory.is_dir():
            return []
        out = []
        for path in sorted(directory.glob("*.json")):
            try:
                payload = json.loads(path.read_text(encoding="utf-8"))
            except (json.JSONDecodeError, OSError):
                continue
            out.append(
                StoreRecord(kind=kind, key=path.stem, revision=payload["revision"], doc=payload["doc"])
            )
        return out
