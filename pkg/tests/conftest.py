"""Shared fixtures: scripted backends, note builders, golden fixture paths."""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np
import pytest

from maple.backend import ChatRequest, EmbeddingVector
from maple.memory import MemoryNote, MemoryStore
from maple.table import Table

REPO_ROOT = Path(__file__).resolve().parent.parent
GOLDEN_DIR = REPO_ROOT / "fixtures" / "golden"
DATA_DIR = Path(__file__).resolve().parent / "data"


class ScriptedBackend:
    """Chat backend serving canned responses per role.

    Responses are consumed in order per role; with ``loop=True`` the last
    response repeats forever. Every request is captured for prompt
    inspection and call counting.
    """

    def __init__(self, scripts: dict[str, list[str]], loop: bool = False):
        self._scripts = {role: list(texts) for role, texts in scripts.items()}
        self._cursor: dict[str, int] = {}
        self._loop = loop
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    def identity(self) -> str:
        return "scripted"

    def calls(self, role: str) -> int:
        return sum(1 for r in self.requests if r.agent_role.value == role)

    def chat(self, request: ChatRequest) -> str:
        role = request.agent_role.value
        with self._lock:
            self.requests.append(request)
            texts = self._scripts.get(role, [])
            if not texts:
                raise AssertionError(f"no script for role {role}")
            i = self._cursor.get(role, 0)
            if i >= len(texts):
                if not self._loop:
                    raise AssertionError(f"script for role {role} exhausted")
                i = len(texts) - 1
            self._cursor[role] = i + 1
            return texts[i]


class FixedEmbedder:
    """Maps exact texts to preset vectors; unknown texts get a fixed default.

    Lets tests place notes at chosen positions in embedding space.
    """

    def __init__(self, dim: int, table: dict[str, tuple[float, ...]] | None = None):
        self.dim = dim
        self.table = dict(table or {})

    def identity(self) -> str:
        return f"fixed-{self.dim}"

    def embed(self, text: str) -> EmbeddingVector:
        if text in self.table:
            return EmbeddingVector(self.table[text])
        vec = np.zeros(self.dim)
        vec[0] = 1.0
        return EmbeddingVector(tuple(vec))


def unit_vectors(n: int, dim: int, seed: int, clusters: int = 0) -> np.ndarray:
    """Deterministic unit vectors; optionally drawn around cluster centers."""
    rng = np.random.default_rng(seed)
    if clusters:
        centers = rng.normal(size=(clusters, dim))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        picks = rng.integers(0, clusters, size=n)
        vecs = centers[picks] + 0.35 * rng.normal(size=(n, dim))
    else:
        vecs = rng.normal(size=(n, dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs


def make_note(i: int, vec, **overrides) -> MemoryNote:
    fields = dict(
        id=f"m{i:06d}",
        question_id=f"q{i}",
        question=f"question number {i}",
        question_type="lookup",
        required_operations=["filter"],
        context=f"context for note {i}",
        keywords=[f"kw{i}"],
        tags=["lookup"],
        correct_answer=f"answer {i}",
        model_answer=f"answer {i}",
        correct_steps=[f"step {i}"],
        embedding=EmbeddingVector(tuple(float(x) for x in vec)),
    )
    fields.update(overrides)
    return MemoryNote(**fields)


def seeded_store(vectors: np.ndarray, embedder=None, **note_overrides) -> MemoryStore:
    store = MemoryStore(embedder or FixedEmbedder(vectors.shape[1]))
    for i, vec in enumerate(vectors, start=1):
        store.add(make_note(i, vec, **note_overrides))
    return store


@pytest.fixture
def goal_table() -> Table:
    return Table(
        columns=["#", "Player", "Goals", "Caps", "Career"],
        rows=[
            ["1", "Landon Donovan", "57", "155", "2000-present"],
            ["2", "Clint Dempsey", "36", "103", "2004-present"],
            ["3", "Eric Wynalda", "34", "106", "1990-2000"],
            ["4", "Brian McBride", "30", "95", "1993-2006"],
            ["5", "Joe-Max Moore", "24", "100", "1992-2002"],
            ["6T", "Jozy Altidore", "21", "67", "2007-present"],
            ["6T", "Bruce Murray", "21", "86", "1985-1993"],
            ["8", "Eddie Johnson", "19", "62", "2004-present"],
            ["9T", "Earnie Stewart", "17", "101", "1990-2004"],
            ["9T", "DaMarcus Beasley", "17", "114", "2001-present"],
        ],
    )


def checker_text(scores: tuple[int, int, int], final: str = "assessment") -> str:
    names = ["Answer Type Checking", "Format Validation", "Evidence Grounding"]
    blocks = [
        f"{name}\nScore: {score}\nComments: comment on {name.lower()}"
        for name, score in zip(names, scores)
    ]
    blocks.append(f"Summary\nTotal Score: {sum(scores)}\nFinal Comments: {final}")
    return "\n\n".join(blocks)


def solver_text(answer: str, block: str = "<NOT CHANGED>", thought: str = "thinking",
                action: str = "do the step") -> str:
    return (
        f"Thought: {thought}\nAction: {action}\n"
        f"Intermediate table: {block}\nAnswer: {answer}"
    )


REFLECTOR_TEXT = (
    "Diagnosis: the answer ignored the time constraint in the question.\n"
    "Improvement plan: filter the rows by the constraint first, then compare."
)

ARCHIVER_SUM_TEXT = """Question Type: lookup
Required Operations: ['filter', 'compare']
Context: Filtering rows by a constraint and comparing a numeric column.
Keywords: ['filter', 'compare']
Tags: ['lookup']
Correct Steps: ['Filter rows', 'Compare values']
Wrong Steps: [ ]
Error Type: none
Error Reason: none"""

ARCHIVER_EVO_FALSE = """Should Evolve: false
Actions: [ ]
Suggested Connections: [ ]
Tags to Update: [ ]
New Context Neighborhood: [ ]
New Tags Neighborhood: [ ]"""
