"""Chat and embedding providers.

Two chat backends are provided: an OpenAI-compatible HTTP client for live
runs, and a deterministic record/replay pair for offline tests. Replay
matching is by (agent role, per-role call index) rather than prompt hash,
so recorded sessions survive cosmetic prompt edits.

The offline embedder is a hashed bag-of-tokens projection: deterministic,
network-free, and close enough to lexical similarity for retrieval tests.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np
import requests

from maple.errors import BackendError, FormatError, ReplayMiss, TransportError

API_KEY_ENV = "MAPLE_API_KEY"

_TOKEN = re.compile(r"[a-z0-9]+")


class AgentRole(str, Enum):
    SOLVER = "solver"
    CHECKER = "checker"
    REFLECTOR = "reflector"
    ARCHIVER_SUM = "archiver_sum"
    ARCHIVER_EVO = "archiver_evo"


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call for a specific agent role."""

    agent_role: AgentRole
    system_text: str
    user_text: str
    decode_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.agent_role, AgentRole):
            raise ValueError(f"unknown agent role: {self.agent_role!r}")
        if not self.user_text:
            raise ValueError("user_text must be non-empty")


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-dimension real vector; entries must be finite."""

    values: tuple[float, ...]

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding entries must be finite")
        object.__setattr__(self, "values", tuple(float(x) for x in arr))

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def cosine_distance(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """1 - cosine similarity; 0 for identical directions, symmetric."""
    va, vb = a.as_array(), b.as_array()
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine distance is undefined for zero vectors")
    return 1.0 - float(np.dot(va, vb)) / (na * nb)


class ChatBackend(Protocol):
    def chat(self, request: ChatRequest) -> str: ...

    def identity(self) -> str: ...


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> EmbeddingVector: ...

    def identity(self) -> str: ...


class HashEmbedder:
    """Offline embedder: hashed bag of tokens, signed buckets, L2-normalized.

    Tokens are lowercased runs of [a-z0-9]; each token is hashed to one of
    ``dim`` buckets with a +/-1 sign. Pure: identical text always yields
    the identical vector.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim

    def identity(self) -> str:
        return f"hash-bow-{self.dim}"

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise BackendError("cannot embed empty text")
        tokens = _TOKEN.findall(text.lower())
        if not tokens:
            # purely non-alphanumeric input: hash it whole so the result
            # stays deterministic and non-zero
            tokens = [text.strip() or text]
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=9).digest()
            bucket = int.from_bytes(digest[:8], "big") % self.dim
            sign = 1.0 if digest[8] & 1 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # colliding signs cancelled everything; fall back to one bucket
            vec[0] = 1.0
            norm = 1.0
        return EmbeddingVector(tuple(vec / norm))


class OpenAIBackend:
    """OpenAI-compatible chat + embeddings over HTTP.

    Auth token comes from the ``MAPLE_API_KEY`` environment variable unless
    given explicitly. Connection problems and 5xx/429 responses raise
    :class:`TransportError` (retryable); other HTTP errors raise
    :class:`BackendError` with the provider message.
    """

    def __init__(
        self,
        base_url: str,
        chat_model: str,
        embed_model: str | None = None,
        api_key: str | None = None,
        timeout: float = 120.0,
        embedding_dim: int | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.chat_model = chat_model
        self.embed_model = embed_model
        self.timeout = timeout
        self.dim = embedding_dim or 0
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self._session = requests.Session()

    def identity(self) -> str:
        return f"openai:{self.base_url}:{self.chat_model}"

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            resp = self._session.post(url, json=payload, headers=headers, timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TransportError(f"cannot reach {url}: {exc}") from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise TransportError(f"{url} returned {resp.status_code}: {resp.text[:500]}")
        if resp.status_code >= 400:
            raise BackendError(f"{url} returned {resp.status_code}: {resp.text[:500]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendError(f"{url} returned non-JSON body") from exc

    def chat(self, request: ChatRequest) -> str:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        payload = {"model": self.chat_model, "messages": messages}
        payload.update(request.decode_params)
        data = self._post("/chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected chat response shape: {data!r:.300}") from exc

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise BackendError("cannot embed empty text")
        if not self.embed_model:
            raise BackendError("no embedding model configured")
        data = self._post("/embeddings", {"model": self.embed_model, "input": text})
        try:
            values = data["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected embedding response shape: {data!r:.300}") from exc
        vec = EmbeddingVector(tuple(float(x) for x in values))
        if self.dim and vec.dim != self.dim:
            raise BackendError(f"embedding dim {vec.dim} != configured {self.dim}")
        self.dim = vec.dim
        return vec


@dataclass(frozen=True)
class TranscriptEntry:
    role: str
    index: int
    response: str
    task_id: str | None = None


class Transcript:
    """Ordered chat responses keyed by (role, per-role call index).

    Entries may carry a ``task_id``; :meth:`for_task` then scopes replay to
    one task, with untagged entries serving as a shared fallback.
    """

    def __init__(self, entries: list[TranscriptEntry], source: str | None = None):
        self.entries = list(entries)
        self.source = source
        self._check_contiguous()

    def _check_contiguous(self):
        groups: dict[tuple, list[int]] = {}
        for e in self.entries:
            groups.setdefault((e.task_id, e.role), []).append(e.index)
        for (task_id, role), indices in groups.items():
            if sorted(indices) != list(range(len(indices))):
                raise FormatError(
                    f"transcript indices for role {role!r}"
                    + (f" (task {task_id})" if task_id else "")
                    + f" are not contiguous from 0: {sorted(indices)}"
                )

    def for_task(self, task_id: str) -> "Transcript":
        scoped = [e for e in self.entries if e.task_id == task_id]
        if not scoped:
            scoped = [e for e in self.entries if e.task_id is None]
        return Transcript(scoped, source=self.source)

    @classmethod
    def load(cls, path) -> "Transcript":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    entries.append(
                        TranscriptEntry(
                            role=rec["role"],
                            index=int(rec["index"]),
                            response=rec["response"],
                            task_id=rec.get("task_id"),
                        )
                    )
                except (ValueError, KeyError, TypeError) as exc:
                    raise FormatError(f"{path}:{lineno}: bad transcript record: {exc}") from exc
        return cls(entries, source=str(path))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                rec = {"role": e.role, "index": e.index, "response": e.response}
                if e.task_id is not None:
                    rec["task_id"] = e.task_id
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


class ReplayBackend:
    """Serves recorded responses by (role, per-role call index).

    Index bookkeeping is internal and lock-protected, so one instance is
    safe under concurrent calls; :meth:`for_task` hands out independent
    cursors so parallel tasks replay deterministically.
    """

    def __init__(self, transcript: Transcript):
        self._responses = {(e.role, e.index): e.response for e in transcript.entries}
        self._transcript = transcript
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()

    def identity(self) -> str:
        return f"replay:{self._transcript.source or 'in-memory'}"

    def for_task(self, task_id: str) -> "ReplayBackend":
        return ReplayBackend(self._transcript.for_task(task_id))

    def chat(self, request: ChatRequest) -> str:
        role = request.agent_role.value
        with self._lock:
            index = self._counters.get(role, 0)
            self._counters[role] = index + 1
        try:
            return self._responses[(role, index)]
        except KeyError:
            raise ReplayMiss(f"no stored response for ({role}, {index})") from None


class RecordingBackend:
    """Wraps a live chat backend and captures every response.

    Per-role indices restart for each :meth:`for_task` scope and recorded
    entries are tagged with the task id, so the resulting transcript can be
    replayed task-parallel.
    """

    def __init__(self, inner: ChatBackend, task_id: str | None = None, _shared=None):
        self._inner = inner
        self._task_id = task_id
        self._shared = _shared if _shared is not None else {"entries": [], "lock": threading.Lock()}
        self._counters: dict[str, int] = {}

    def identity(self) -> str:
        return f"record({self._inner.identity()})"

    def for_task(self, task_id: str) -> "RecordingBackend":
        inner = self._inner
        scoped = inner.for_task(task_id) if hasattr(inner, "for_task") else inner
        return RecordingBackend(scoped, task_id=task_id, _shared=self._shared)

    def chat(self, request: ChatRequest) -> str:
        response = self._inner.chat(request)
        role = request.agent_role.value
        index = self._counters.get(role, 0)
        self._counters[role] = index + 1
        entry = TranscriptEntry(role=role, index=index, response=response, task_id=self._task_id)
        with self._shared["lock"]:
            self._shared["entries"].append(entry)
        return entry.response

    def transcript(self) -> Transcript:
        with self._shared["lock"]:
            return Transcript(list(self._shared["entries"]))

    def save(self, path) -> None:
        self.transcript().save(path)
