"""Diagnostic lability: variance of pairwise cosine similarities across runs.

The embedding provider is pluggable: an HTTP endpoint for real sentence
embeddings, or the deterministic hashed bag-of-tokens fallback that keeps the
test suite free of model downloads.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ..errors import BadStatus, TooFewRuns, TransportError


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


_TOKEN_RE = re.compile(r"\w+")


class TokenHashEmbedder:
    """Hashed bag-of-tokens, unit-normalized: a pure function of the text."""

    def __init__(self, dim: int = 256):
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        vectors = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.casefold()):
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                index = int.from_bytes(digest[:4], "big") % self.dim
                sign = 1.0 if digest[4] % 2 == 0 else -1.0
                vectors[i, index] += sign
            norm = np.linalg.norm(vectors[i])
            if norm > 0:
                vectors[i] /= norm
        return vectors


class HttpEmbedder:
    """POST {input: [...], model} -> {data: [{embedding: [...]}]}."""

    def __init__(self, endpoint_url: str, model: str = "", timeout_ms: int = 30_000):
        self.endpoint_url = endpoint_url
        self.model = model
        self.timeout_ms = timeout_ms

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        import httpx

        body = {"input": list(texts)}
        if self.model:
            body["model"] = self.model
        try:
            response = httpx.post(self.endpoint_url, json=body, timeout=self.timeout_ms / 1000.0)
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding request failed: {exc}") from exc
        if response.status_code >= 400:
            raise BadStatus(response.status_code, response.text)
        data = response.json()["data"]
        return np.asarray([d["embedding"] for d in data], dtype=np.float64)


@dataclass(frozen=True)
class StabilityScore:
    patient_id: str
    model: str
    variance: float
    n_runs: int

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "model": self.model,
            "variance": self.variance,
            "n_runs": self.n_runs,
        }


def pairwise_cosine_similarities(vectors: np.ndarray) -> list[float]:
    """All n(n-1)/2 unordered pairs, in (i, j) index order."""
    sims: list[float] = []
    n = vectors.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = vectors[i], vectors[j]
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na == 0 or nb == 0:
                sims.append(0.0)
            else:
                sims.append(float(np.dot(a, b) / (na * nb)))
    return sims


def stability_score(
    texts: Sequence[str],
    embedder: Embedder | None = None,
    patient_id: str = "",
    model: str = "",
) -> StabilityScore:
    """Population variance of pairwise cosine similarities over repeated outputs."""
    if len(texts) < 2:
        raise TooFewRuns(f"need at least 2 texts, got {len(texts)}")
    if embedder is None:
        embedder = TokenHashEmbedder()
    vectors = embedder.embed(texts)
    sims = pairwise_cosine_similarities(vectors)
    mean = sum(sims) / len(sims)
    variance = sum((s - mean) ** 2 for s in sims) / len(sims)
    return StabilityScore(patient_id=patient_id, model=model, variance=variance, n_runs=len(texts))
