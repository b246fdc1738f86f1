"""Embedding providers: a deterministic hashing fallback and a remote client.

Providers map text to a fixed-dimension real vector. The hashing provider is
the offline default used by tests and the CLI; the HTTP provider talks to an
embeddings endpoint and exists so a hosted model can be swapped in through
configuration.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
import urllib.error
import urllib.request
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import ProviderError, TransportError

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def word_tokens(text: str) -> list[str]:
    """Lowercased maximal alphanumeric runs (same rule as the TF-IDF tokenizer)."""
    return _WORD_RE.findall(text.lower())


def call_tokens(text: str) -> list[str]:
    """Split a canonical trajectory serialization into its per-call tokens.

    Honors backslash escaping, so separators inside names/values survive.
    """
    tokens: list[str] = []
    cur: list[str] = []
    it = iter(text)
    for ch in it:
        if ch == "\\":
            cur.append(ch)
            cur.append(next(it, ""))
        elif ch == "|":
            tokens.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        tokens.append("".join(cur))
    return [t for t in tokens if t]


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dim


class HashingEmbedder:
    """Deterministic fallback: token counts feature-hashed into ``dim``
    buckets, L2-normalized. Default tokenization splits trajectory
    serializations into call tokens; pass ``tokenizer=word_tokens`` for
    natural-language text."""

    def __init__(self, dim: int = 256, tokenizer: Callable[[str], Sequence[str]] = call_tokens):
        if dim < 1:
            raise ProviderError("embedding dimension must be >= 1")
        self.dim = dim
        self._tokenizer = tokenizer

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in self._tokenizer(text):
            vec[_bucket(token, self.dim)] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec


class HttpEmbedder:
    """Client for an OpenAI-style ``/embeddings`` endpoint.

    In-flight requests are bounded by a semaphore; transient failures are
    retried up to ``retry_cap`` times. The credential is read from the
    environment, never from configuration files.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int,
        api_key_env: str = "TRAJCHECK_API_KEY",
        retry_cap: int = 2,
        concurrency: int = 4,
        backoff: float = 0.5,
        transport: Callable[[str, dict, bytes], dict] | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.dim = dim
        self.api_key_env = api_key_env
        self.retry_cap = retry_cap
        self.backoff = backoff
        self._sem = threading.Semaphore(concurrency)
        self._transport = transport or _http_post_json

    def embed(self, text: str) -> np.ndarray:
        payload = {"model": self.model, "input": text}
        body = json.dumps(payload).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = f"{self.endpoint}/embeddings"
        last_error: Exception | None = None
        for attempt in range(self.retry_cap + 1):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with self._sem:
                    response = self._transport(url, headers, body)
                break
            except TransportError as exc:
                last_error = exc
        else:
            raise TransportError(f"embedding request failed after retries: {last_error}")
        try:
            values = response["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError):
            raise ProviderError(f"malformed embedding response: {response!r}") from None
        vec = np.asarray(values, dtype=float)
        if vec.ndim != 1 or vec.shape[0] != self.dim:
            raise ProviderError(
                f"provider returned dimension {vec.shape}, expected ({self.dim},)"
            )
        return vec


def _http_post_json(url: str, headers: dict, body: bytes) -> dict:
    request = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(request, timeout=60) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
        raise TransportError(str(exc)) from None
