"""Embedding providers: an HTTP client and a deterministic hashed bag-of-words."""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from typing import Protocol

import httpx
import numpy as np

from .corpus import tokenize
from .errors import EmbeddingFailure

log = logging.getLogger(__name__)


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashedBowEmbedder:
    """Term-hash buckets with L2 normalisation.

    Tokens are lowercased and hashed with blake2b so the mapping is stable
    across processes (unlike ``hash``).
    """

    def __init__(self, dim: int = 512):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _bucket(self, token: str) -> int:
        h = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(h, "little") % self.dim

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmbeddingFailure("cannot embed empty text")
        vec = np.zeros(self.dim)
        for tok in tokenize(text.lower()):
            vec[self._bucket(tok)] += 1.0
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise EmbeddingFailure("text produced no tokens")
        return vec / norm


class HttpEmbedder:
    """Client for an embeddings endpoint.

    Request: ``{"model": ..., "input": [text]}``; response:
    ``{"data": [{"embedding": [...]}]}``. Retries transport errors, 429 and
    5xx with exponential backoff. A semaphore caps concurrent requests.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "mxbai-embed-large",
        api_key: str | None = None,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("CHEMOUTCOME_EMBED_API_KEY")
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.dim: int | None = None
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict:
        h = {"Content-Type": "application/json"}
        if self.api_key:
            h["Authorization"] = f"Bearer {self.api_key}"
        return h

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmbeddingFailure("cannot embed empty text")
        payload = {"model": self.model, "input": [text]}
        last = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._sem:
                    resp = self._client.post(self.endpoint, json=payload, headers=self._headers())
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise httpx.HTTPStatusError(f"status {resp.status_code}", request=resp.request, response=resp)
                resp.raise_for_status()
                vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=float)
                break
            except httpx.HTTPStatusError as exc:
                last = exc
                if exc.response.status_code < 500 and exc.response.status_code != 429:
                    raise EmbeddingFailure(f"embedding request rejected: {exc}", attempts=attempt) from exc
            except (httpx.TransportError, KeyError, IndexError, ValueError) as exc:
                last = exc
            if attempt < self.max_attempts:
                time.sleep(self.backoff * 2 ** (attempt - 1))
        else:
            raise EmbeddingFailure(
                f"embedding failed after {self.max_attempts} attempts: {last}", attempts=self.max_attempts
            )
        if vec.ndim != 1 or not np.all(np.isfinite(vec)) or not vec.size:
            raise EmbeddingFailure("endpoint returned a malformed embedding")
        if self.dim is None:
            self.dim = vec.size
        elif vec.size != self.dim:
            raise EmbeddingFailure(f"embedding dim changed from {self.dim} to {vec.size}")
        return vec
