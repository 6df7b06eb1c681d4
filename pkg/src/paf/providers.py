"""Chat and embedding provider contracts.

Two families ship here: deterministic mocks for offline tests and
simulation, and remote clients speaking the OpenAI-compatible wire shape
(chat completions with streaming, embeddings).

Remote configuration comes from env vars: PAF_API_KEY, PAF_BASE_URL,
PAF_CHAT_MODEL, PAF_EMBED_MODEL.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Protocol, Sequence

import numpy as np

ROLES = ("system", "user", "assistant")


class ProviderError(Exception):
    """Base class for provider failures."""


class ProviderUnavailable(ProviderError):
    """Transient transport/server failure; safe to retry."""


class ProviderRejected(ProviderError):
    """Non-retryable rejection (bad request, auth, contract violation)."""

    def __init__(self, message: str, status: Optional[int] = None):
        self.status = status
        super().__init__(message)


class StreamInterrupted(ProviderError):
    """Stream died mid-response; the partial text is preserved."""

    def __init__(self, partial_text: str, cause: str = ""):
        self.partial_text = partial_text
        super().__init__(f"stream interrupted after {len(partial_text)} chars: {cause}")


class DimensionMismatch(ProviderError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"embedding dimension mismatch: expected {expected}, got {got}")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"bad role {self.role!r}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class ChatChunk:
    delta: str
    is_final: bool = False


class ChatProvider(Protocol):
    def chat_stream(self, messages: Sequence[ChatMessage]) -> Iterator[ChatChunk]: ...


class Embedder(Protocol):
    dimension: int
    tag: str

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def chat_text(provider: ChatProvider, messages: Sequence[ChatMessage]) -> str:
    """Consume a stream into the full response text."""
    return "".join(chunk.delta for chunk in provider.chat_stream(messages))


def _check_chat_preconditions(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise ProviderRejected("message list must be non-empty")
    if messages[0].role != "system":
        raise ProviderRejected("first message must have role=system")


def _digest(*parts: str) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def _chunked(text: str, size: int) -> Iterator[ChatChunk]:
    if not text:
        yield ChatChunk(delta="", is_final=True)
        return
    pieces = [text[i : i + size] for i in range(0, len(text), size)]
    for piece in pieces[:-1]:
        yield ChatChunk(delta=piece)
    yield ChatChunk(delta=pieces[-1], is_final=True)


class MockChatProvider:
    """Deterministic scripted chat provider.

    Responses are looked up by (system-prompt hash, last user turn), then by
    last user turn alone; otherwise a deterministic fallback derived from
    (seed, full prompt) is emitted. Bit-deterministic across runs and safe
    under concurrent use (the script is read-only after setup).
    """

    def __init__(self, seed: int = 0, chunk_size: int = 6):
        self.seed = seed
        self.chunk_size = chunk_size
        self._script: dict[tuple[str, str], str] = {}
        self._calls = 0
        self._lock = threading.Lock()

    def script(self, response: str, last_user: str, system: Optional[str] = None) -> "MockChatProvider":
        """Register a canned response; system=None matches any system prompt."""
        key = (_digest(system) if system is not None else "*", last_user)
        self._script[key] = response
        return self

    @property
    def call_count(self) -> int:
        return self._calls

    def _resolve(self, messages: Sequence[ChatMessage]) -> str:
        system = messages[0].content
        last_user = next(
            (m.content for m in reversed(messages) if m.role == "user"), ""
        )
        exact = self._script.get((_digest(system), last_user))
        if exact is not None:
            return exact
        loose = self._script.get(("*", last_user))
        if loose is not None:
            return loose
        tag = _digest(str(self.seed), system, last_user)[:16]
        return f"auto reply {tag}."

    def chat_stream(self, messages: Sequence[ChatMessage]) -> Iterator[ChatChunk]:
        _check_chat_preconditions(messages)
        text = self._resolve(messages)
        with self._lock:
            self._calls += 1
        return _chunked(text, self.chunk_size)


class SequenceChatProvider:
    """Test double that replays a fixed list of responses in call order.

    Unlike MockChatProvider this is order-sensitive; use it for hand-traced
    replay fixtures (e.g. scripting a judge across turns).
    """

    def __init__(self, responses: Iterable[str], chunk_size: int = 8):
        self._responses = list(responses)
        self.chunk_size = chunk_size
        self.prompts: list[tuple[ChatMessage, ...]] = []
        self._lock = threading.Lock()

    def chat_stream(self, messages: Sequence[ChatMessage]) -> Iterator[ChatChunk]:
        _check_chat_preconditions(messages)
        with self._lock:
            if not self._responses:
                raise ProviderUnavailable("scripted responses exhausted")
            self.prompts.append(tuple(messages))
            text = self._responses.pop(0)
        return _chunked(text, self.chunk_size)


class FailingChatProvider:
    """Always raises; for abort-path tests."""

    def __init__(self, exc: Optional[ProviderError] = None):
        self.exc = exc or ProviderUnavailable("chat provider down")

    def chat_stream(self, messages: Sequence[ChatMessage]) -> Iterator[ChatChunk]:
        raise self.exc


def _check_embed_preconditions(texts: Sequence[str]) -> None:
    for t in texts:
        if not t:
            raise ProviderRejected("cannot embed empty text")


class HashingEmbedder:
    """Seeded feature-hashing embedder: sum of per-token random vectors.

    Equal texts always map to equal vectors; distinct texts collide only with
    negligible probability. Vectors are unnormalized by default so magnitude
    carries signal; pass normalize=True for a unit-norm scoring embedder.
    """

    def __init__(self, dimension: int = 16, seed: int = 0, normalize: bool = False):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self.normalize = normalize
        self.tag = f"hash-d{dimension}-s{seed}" + ("-unit" if normalize else "")
        self._token_cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _token_vector(self, token: str) -> np.ndarray:
        with self._lock:
            vec = self._token_cache.get(token)
        if vec is None:
            raw = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(raw[:8], "big"))
            vec = rng.standard_normal(self.dimension)
            with self._lock:
                self._token_cache[token] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_embed_preconditions(texts)
        out = []
        for text in texts:
            tokens = text.split() or [text]
            vec = np.zeros(self.dimension)
            for token in tokens:
                vec = vec + self._token_vector(token)
            if self.normalize:
                norm = float(np.linalg.norm(vec))
                if norm > 0:
                    vec = vec / norm
            out.append(vec)
        return out


class PlantedEmbedder:
    """Embedder realizing declared pairwise dot-product targets exactly.

    Each declared pair (text_a, text_b, target) gets a private dimension
    carrying the whole target, so every declared dot product is met within
    floating-point error regardless of how pairs overlap. Texts never
    declared fall back to feature hashing confined to a trailing block of
    dimensions, so their dot product with any planted text is 0.
    """

    def __init__(
        self,
        pairs: Sequence[tuple[str, str, float]],
        fallback_dims: int = 8,
        seed: int = 0,
    ):
        seen: set[tuple[str, str]] = set()
        n_pairs = len(pairs)
        self.dimension = n_pairs + fallback_dims
        self.tag = f"planted-{n_pairs}p-d{self.dimension}"
        self._vectors: dict[str, np.ndarray] = {}
        self._hash = HashingEmbedder(dimension=fallback_dims, seed=seed) if fallback_dims else None
        self._fallback_dims = fallback_dims
        for k, (a, b, target) in enumerate(pairs):
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"pair declared twice: {key}")
            seen.add(key)
            va = self._vectors.setdefault(a, np.zeros(self.dimension))
            if a == b:
                if target < 0:
                    raise ValueError("self-dot target must be non-negative")
                va[k] = target ** 0.5
                continue
            vb = self._vectors.setdefault(b, np.zeros(self.dimension))
            va[k] = target
            vb[k] = 1.0

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_embed_preconditions(texts)
        out = []
        for text in texts:
            vec = self._vectors.get(text)
            if vec is None:
                vec = np.zeros(self.dimension)
                if self._fallback_dims:
                    vec[-self._fallback_dims :] = self._hash.embed([text])[0]
            out.append(vec.copy())
        return out


class FailingEmbedder:
    """Always raises; for router degradation tests."""

    dimension = 1
    tag = "failing"

    def __init__(self, exc: Optional[ProviderError] = None):
        self.exc = exc or ProviderUnavailable("embedder down")

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        raise self.exc


# --- remote (OpenAI-compatible wire shape) ---------------------------------

MAX_RETRIES = 2
BACKOFF_BASE = 0.5


def _env(name: str, default: Optional[str] = None) -> str:
    value = os.environ.get(name, default)
    if value is None:
        raise ProviderRejected(f"missing environment variable {name}")
    return value


def _with_retries(fn: Callable, sleep: Callable[[float], None]):
    attempt = 0
    while True:
        try:
            return fn()
        except ProviderUnavailable:
            if attempt >= MAX_RETRIES:
                raise
            sleep(BACKOFF_BASE * (2 ** attempt))
            attempt += 1


class RemoteChatProvider:
    """Streaming chat client for an OpenAI-compatible /chat/completions endpoint."""

    def __init__(
        self,
        base_url: str,
        api_key: str,
        model: str,
        transport=None,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 60.0,
    ):
        import httpx

        self.model = model
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            transport=transport,
            timeout=timeout,
        )

    @classmethod
    def from_env(cls, **kwargs) -> "RemoteChatProvider":
        return cls(
            base_url=_env("PAF_BASE_URL"),
            api_key=_env("PAF_API_KEY"),
            model=_env("PAF_CHAT_MODEL"),
            **kwargs,
        )

    def chat_stream(self, messages: Sequence[ChatMessage]) -> Iterator[ChatChunk]:
        _check_chat_preconditions(messages)
        payload = {
            "model": self.model,
            "stream": True,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        }
        deltas = _with_retries(lambda: self._collect(payload), self._sleep)
        if not deltas:
            deltas = [""]
        for delta in deltas[:-1]:
            yield ChatChunk(delta=delta)
        yield ChatChunk(delta=deltas[-1], is_final=True)

    def _collect(self, payload) -> list[str]:
        import httpx

        partial: list[str] = []
        try:
            with self._client.stream(
                "POST", "/chat/completions", json=payload
            ) as response:
                _raise_for_status(response)
                for line in response.iter_lines():
                    if not line.startswith("data:"):
                        continue
                    data = line[len("data:") :].strip()
                    if data == "[DONE]":
                        return partial
                    try:
                        event = json.loads(data)
                    except json.JSONDecodeError:
                        continue
                    delta = (
                        event.get("choices", [{}])[0]
                        .get("delta", {})
                        .get("content")
                    )
                    if delta:
                        partial.append(delta)
        except httpx.TransportError as exc:
            if partial:
                raise StreamInterrupted("".join(partial), str(exc)) from exc
            raise ProviderUnavailable(str(exc)) from exc
        # Stream ended without the [DONE] sentinel.
        if not partial:
            raise ProviderUnavailable("stream ended with no content")
        raise StreamInterrupted("".join(partial), "stream ended without [DONE]")


class RemoteEmbedder:
    """Client for an OpenAI-compatible /embeddings endpoint."""

    def __init__(
        self,
        base_url: str,
        api_key: str,
        model: str,
        transport=None,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 60.0,
    ):
        import httpx

        self.model = model
        self.tag = f"remote:{model}"
        self.dimension = 0  # learned from the first response
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            transport=transport,
            timeout=timeout,
        )

    @classmethod
    def from_env(cls, **kwargs) -> "RemoteEmbedder":
        return cls(
            base_url=_env("PAF_BASE_URL"),
            api_key=_env("PAF_API_KEY"),
            model=_env("PAF_EMBED_MODEL"),
            **kwargs,
        )

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_embed_preconditions(texts)
        if not texts:
            return []
        payload = {"model": self.model, "input": list(texts)}
        data = _with_retries(lambda: self._post(payload), self._sleep)
        rows = sorted(data.get("data", []), key=lambda row: row.get("index", 0))
        if len(rows) != len(texts):
            raise ProviderRejected(
                f"expected {len(texts)} embeddings, got {len(rows)}"
            )
        vectors = [np.asarray(row["embedding"], dtype=float) for row in rows]
        dims = {v.shape[0] for v in vectors}
        if len(dims) > 1 or (self.dimension and dims != {self.dimension}):
            raise DimensionMismatch(self.dimension or vectors[0].shape[0], max(dims))
        if not self.dimension:
            self.dimension = vectors[0].shape[0]
        for v in vectors:
            if not np.all(np.isfinite(v)):
                raise ProviderRejected("embedding contains non-finite components")
        return vectors

    def _post(self, payload) -> dict:
        import httpx

        try:
            response = self._client.post("/embeddings", json=payload)
        except httpx.TransportError as exc:
            raise ProviderUnavailable(str(exc)) from exc
        _raise_for_status(response)
        return response.json()


def _raise_for_status(response) -> None:
    if response.status_code == 200:
        return
    if response.status_code == 429 or response.status_code >= 500:
        raise ProviderUnavailable(f"upstream status {response.status_code}")
    raise ProviderRejected(
        f"upstream status {response.status_code}", status=response.status_code
    )


@dataclass
class ProviderSet:
    """Providers an engine session uses; judge defaults to the agent chat provider."""

    chat: ChatProvider
    embedder: Optional[Embedder] = None
    judge_chat: Optional[ChatProvider] = None

    def judge(self) -> ChatProvider:
        return self.judge_chat or self.chat


def mock_providers(seed: int = 0, dimension: int = 32) -> ProviderSet:
    return ProviderSet(
        chat=MockChatProvider(seed=seed),
        embedder=HashingEmbedder(dimension=dimension, seed=seed),
    )
