"""The evolving long-term memory store.

Notes carry embeddings, tags and links. Retrieval is a brute-force cosine
scan in two modes (solver-time and archiver-time) against separate distance
thresholds. Insertion is density-filtered: a note that already has at least
``k_min`` neighbors within the archiver threshold is dropped. Surviving
notes may trigger evolution: strengthening links from the new note and/or
rewriting neighbor context and tags.

Distance is ``1 - cosine(a, b)``; ties at equal distance break on ascending
note id so retrieval is fully deterministic. Notes are never deleted and
links only grow.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from threading import RLock
from typing import TYPE_CHECKING, Callable, Iterable

from maple.backend import Embedder, EmbeddingVector, cosine_distance
from maple.clock import utc_now_iso
from maple.errors import FormatError, StoreError
from maple.table import Table

if TYPE_CHECKING:
    from maple.agents import EvolutionDecision

logger = logging.getLogger(__name__)

STORE_FORMAT_VERSION = 1

EVOLUTION_ACTIONS = ("strengthen", "update_neighbor")


class ErrorType(str, Enum):
    LOGICAL_REASONING = "logical_reasoning"
    COUNTING_AGGREGATION = "counting_aggregation"
    FORMAT_TEMPORAL = "format_temporal"
    INCOMPLETE_EXTRACTION = "incomplete_extraction"
    CALCULATION_COMPARISON = "calculation_comparison"
    OTHER = "other"
    NONE = "none"


def coerce_error_type(text: str) -> tuple[ErrorType, bool]:
    """Map free text onto the closed error taxonomy.

    Returns (member, known); unknown labels map to ``other`` with
    known=False so callers can log the fallback.
    """
    norm = "_".join(w for w in "".join(
        ch if ch.isalnum() else " " for ch in text.lower()
    ).split())
    for suffix in ("_errors", "_error"):
        if norm.endswith(suffix):
            norm = norm[: -len(suffix)]
    try:
        return ErrorType(norm), True
    except ValueError:
        return ErrorType.OTHER, False


@dataclass
class MemoryNote:
    """One distilled problem-solving episode.

    ``embedding`` may be absent on a freshly summarized note; the store
    fills it from :meth:`embedding_text` before retrieval or insertion.
    """

    id: str = ""
    question_id: str = ""
    question: str = ""
    question_type: str = ""
    required_operations: list[str] = field(default_factory=list)
    context: str = ""
    keywords: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    correct_answer: str = ""
    model_answer: str = ""
    correct_steps: list[str] = field(default_factory=list)
    wrong_steps: list[str] = field(default_factory=list)
    error_type: ErrorType = ErrorType.NONE
    error_reason: str = "none"
    links: list[str] = field(default_factory=list)
    embedding: EmbeddingVector | None = None
    created_at: str = ""
    updated_at: str = ""

    def embedding_text(self) -> str:
        """Text the note is embedded from: context, keywords and tags."""
        parts = [self.context] + list(self.keywords) + list(self.tags)
        return " ".join(p for p in parts if p)

    def to_dict(self, with_links: bool = True) -> dict:
        data = {
            "id": self.id,
            "question_id": self.question_id,
            "question": self.question,
            "question_type": self.question_type,
            "required_operations": list(self.required_operations),
            "context": self.context,
            "keywords": list(self.keywords),
            "tags": list(self.tags),
            "correct_answer": self.correct_answer,
            "model_answer": self.model_answer,
            "correct_steps": list(self.correct_steps),
            "wrong_steps": list(self.wrong_steps),
            "error_type": self.error_type.value,
            "error_reason": self.error_reason,
            "embedding": list(self.embedding.values) if self.embedding else None,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }
        if with_links:
            data["links"] = list(self.links)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryNote":
        emb = data.get("embedding")
        return cls(
            id=data["id"],
            question_id=data.get("question_id", ""),
            question=data.get("question", ""),
            question_type=data.get("question_type", ""),
            required_operations=list(data.get("required_operations", [])),
            context=data.get("context", ""),
            keywords=list(data.get("keywords", [])),
            tags=list(data.get("tags", [])),
            correct_answer=data.get("correct_answer", ""),
            model_answer=data.get("model_answer", ""),
            correct_steps=list(data.get("correct_steps", [])),
            wrong_steps=list(data.get("wrong_steps", [])),
            error_type=ErrorType(data.get("error_type", "none")),
            error_reason=data.get("error_reason", "none"),
            links=list(data.get("links", [])),
            embedding=EmbeddingVector(tuple(emb)) if emb else None,
            created_at=data.get("created_at", ""),
            updated_at=data.get("updated_at", ""),
        )


@dataclass(frozen=True)
class RetrievalConfig:
    """Retrieval and density-filter knobs.

    ``delta_solver`` guards prompt-augmentation retrieval; ``delta_archiver``
    guards neighbor retrieval during memory integration. ``k_min`` is the
    neighbor count at which a new note is considered redundant and dropped.
    """

    k: int = 5
    k_min: int = 2
    delta_solver: float = 0.3
    delta_archiver: float = 0.7

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 <= self.k_min <= self.k:
            raise ValueError("k_min must satisfy 0 <= k_min <= k")
        for name in ("delta_solver", "delta_archiver"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


class QueryKind(str, Enum):
    SOLVER_TIME = "solver_time"
    ARCHIVER_TIME = "archiver_time"


@dataclass(frozen=True)
class RetrievalHit:
    note_id: str
    distance: float


@dataclass(frozen=True)
class RetrievalResult:
    hits: tuple[RetrievalHit, ...]
    query_kind: QueryKind

    def __post_init__(self):
        distances = [h.distance for h in self.hits]
        if any(b < a for a, b in zip(distances, distances[1:])):
            raise ValueError("retrieval hits must be sorted by distance")

    def note_ids(self) -> list[str]:
        return [h.note_id for h in self.hits]


@dataclass(frozen=True)
class IntegrationOutcome:
    added: bool
    evolved: bool
    links_added: int = 0
    neighbors_updated: int = 0


class MemoryStore:
    """Brute-force vector store over memory notes, with evolution.

    Single-writer, multi-reader: all mutation happens under one lock and
    readers never observe a half-applied evolution. Desk-scale by design;
    no ANN index.
    """

    def __init__(self, embedder: Embedder, clock: Callable[[], str] | None = None):
        self.embedder = embedder
        self.clock = clock or utc_now_iso
        self.notes: dict[str, MemoryNote] = {}
        self.notes_seen = 0
        self.notes_added = 0
        self.evolution_ops = 0
        self.evolved_memory_ids: list[str] = []
        self.strengthen_distances: list[float] = []
        self.update_distances: list[float] = []
        self._seq = 0
        self._lock = RLock()

    def __len__(self) -> int:
        return len(self.notes)

    def get(self, note_id: str) -> MemoryNote:
        try:
            return self.notes[note_id]
        except KeyError:
            raise StoreError(f"unknown note id: {note_id}") from None

    def next_id(self) -> str:
        with self._lock:
            self._seq += 1
            return f"m{self._seq:06d}"

    def embed_note(self, note: MemoryNote) -> None:
        note.embedding = self.embedder.embed(note.embedding_text())

    def add(self, note: MemoryNote) -> str:
        """Insert a note directly, bypassing filtering and counters.

        Used for seeding and loading; normal ingestion goes through
        :meth:`integrate`.
        """
        with self._lock:
            if not note.id:
                note.id = self.next_id()
            else:
                # keep the sequence ahead of externally assigned ids
                m = re.fullmatch(r"m(\d+)", note.id)
                if m:
                    self._seq = max(self._seq, int(m.group(1)))
            if note.id in self.notes:
                raise StoreError(f"duplicate note id: {note.id}")
            if note.embedding is None:
                self.embed_note(note)
            if note.embedding.dim != self.embedder.dim:
                raise StoreError(
                    f"embedding dim {note.embedding.dim} != store dim {self.embedder.dim}"
                )
            for linked in note.links:
                if linked not in self.notes:
                    raise StoreError(f"link target does not exist: {linked}")
            now = self.clock()
            note.created_at = note.created_at or now
            note.updated_at = note.updated_at or note.created_at
            self.notes[note.id] = note
            return note.id

    def _scan(
        self, query: EmbeddingVector, delta: float, k: int, exclude: str | None = None
    ) -> list[RetrievalHit]:
        hits = []
        for note in self.notes.values():
            if note.id == exclude:
                continue
            d = cosine_distance(query, note.embedding)
            if d <= delta:
                hits.append(RetrievalHit(note_id=note.id, distance=d))
        hits.sort(key=lambda h: (h.distance, h.note_id))
        return hits[:k]

    def retrieve_solver(
        self, table: Table, question: str, cfg: RetrievalConfig
    ) -> RetrievalResult:
        """Neighbors for prompt augmentation, keyed on table header + question."""
        query = self.embedder.embed(table.header_line() + "\n" + question)
        with self._lock:
            hits = self._scan(query, cfg.delta_solver, cfg.k)
        return RetrievalResult(hits=tuple(hits), query_kind=QueryKind.SOLVER_TIME)

    def retrieve_archiver(self, note: MemoryNote, cfg: RetrievalConfig) -> RetrievalResult:
        """Neighbors of a candidate note; the candidate itself is excluded."""
        if note.embedding is None:
            raise StoreError("candidate note must be embedded before retrieval")
        with self._lock:
            hits = self._scan(note.embedding, cfg.delta_archiver, cfg.k, exclude=note.id)
        return RetrievalResult(hits=tuple(hits), query_kind=QueryKind.ARCHIVER_TIME)

    def integrate(
        self,
        note: MemoryNote,
        cfg: RetrievalConfig,
        decide: Callable[[MemoryNote, list[MemoryNote]], "EvolutionDecision"],
    ) -> IntegrationOutcome:
        """Density-filter, optionally evolve, then persist a new note.

        A note with >= ``k_min`` neighbors inside ``delta_archiver`` is
        considered redundant and dropped. Otherwise ``decide`` is consulted;
        a should-evolve decision may append links to the new note
        (strengthen) and rewrite neighbor context/tags positionally
        (update_neighbor), re-embedding every touched neighbor. The new
        note is persisted last, so readers never see links to it from a
        half-applied evolution.
        """
        with self._lock:
            self.notes_seen += 1
            if note.embedding is None:
                self.embed_note(note)
            result = self.retrieve_archiver(note, cfg)
            if len(result.hits) >= cfg.k_min:
                logger.debug(
                    "note filtered: %d neighbors within %.3f (k_min=%d)",
                    len(result.hits), cfg.delta_archiver, cfg.k_min,
                )
                return IntegrationOutcome(added=False, evolved=False)

            if not note.id:
                note.id = self.next_id()
            neighbors = [self.notes[h.note_id] for h in result.hits]
            decision = decide(note, neighbors)

            links_added = 0
            neighbors_updated = 0
            evolved = False
            if decision.should_evolve:
                self.evolution_ops += 1
                evolved = True
                distances = [h.distance for h in result.hits]
                if "strengthen" in decision.actions:
                    links_added = self._apply_strengthen(note, decision, distances)
                if "update_neighbor" in decision.actions:
                    neighbors_updated = self._apply_neighbor_updates(
                        neighbors, decision, distances
                    )
                if decision.tags_to_update:
                    note.tags = list(decision.tags_to_update)

            self.add(note)
            self.notes_added += 1
            return IntegrationOutcome(
                added=True,
                evolved=evolved,
                links_added=links_added,
                neighbors_updated=neighbors_updated,
            )

    def _apply_strengthen(self, note, decision, distances) -> int:
        unknown = [i for i in decision.suggested_connections if i not in self.notes]
        if unknown:
            logger.warning(
                "strengthen skipped: unknown neighbor id(s) %s", ", ".join(unknown)
            )
            return 0
        added = 0
        for target in decision.suggested_connections:
            if target not in note.links:
                note.links.append(target)
                added += 1
        self.strengthen_distances.extend(distances)
        self.evolved_memory_ids.append(note.id)
        return added

    def _apply_neighbor_updates(self, neighbors, decision, distances) -> int:
        contexts = list(decision.new_context_neighborhood)
        tag_lists = list(decision.new_tags_neighborhood)
        wanted = max(len(contexts), len(tag_lists))
        if wanted > len(neighbors):
            logger.warning(
                "update_neighbor: %d update(s) for %d neighbor(s); extras ignored",
                wanted, len(neighbors),
            )
        updated = 0
        for i, neighbor in enumerate(neighbors[:wanted]):
            changed = False
            if i < len(contexts) and contexts[i] != neighbor.context:
                neighbor.context = contexts[i]
                changed = True
            if i < len(tag_lists) and list(tag_lists[i]) != neighbor.tags:
                neighbor.tags = list(tag_lists[i])
                changed = True
            if changed:
                self.embed_note(neighbor)
                neighbor.updated_at = self.clock()
            updated += 1
            self.evolved_memory_ids.append(neighbor.id)
        if updated:
            self.update_distances.extend(distances)
        return updated

    # -- persistence ------------------------------------------------------

    def persist(self, path) -> None:
        """Write the store as line-per-record JSON: header, notes, links, counters."""
        with self._lock, open(path, "w", encoding="utf-8") as fh:
            header = {
                "kind": "header",
                "version": STORE_FORMAT_VERSION,
                "embedding_dim": self.embedder.dim,
                "embedder": self.embedder.identity(),
            }
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
            for note in self.notes.values():
                rec = {"kind": "note", **note.to_dict(with_links=False)}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            for note in self.notes.values():
                for target in note.links:
                    fh.write(
                        json.dumps({"kind": "link", "src": note.id, "dst": target})
                        + "\n"
                    )
            counters = {
                "kind": "counters",
                "notes_seen": self.notes_seen,
                "notes_added": self.notes_added,
                "evolution_ops": self.evolution_ops,
                "evolved_memory_ids": list(self.evolved_memory_ids),
                "strengthen_distances": list(self.strengthen_distances),
                "update_distances": list(self.update_distances),
                "seq": self._seq,
            }
            fh.write(json.dumps(counters, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path, embedder: Embedder, clock: Callable[[], str] | None = None) -> "MemoryStore":
        store = cls(embedder, clock=clock)
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
            try:
                header = json.loads(first)
            except ValueError as exc:
                raise FormatError(f"{path}: corrupted store header") from exc
            if not isinstance(header, dict) or header.get("kind") != "header":
                raise FormatError(f"{path}: first record is not a store header")
            if header.get("version") != STORE_FORMAT_VERSION:
                raise FormatError(
                    f"{path}: store version {header.get('version')} "
                    f"!= supported {STORE_FORMAT_VERSION}"
                )
            if header.get("embedding_dim") != embedder.dim:
                raise FormatError(
                    f"{path}: store dim {header.get('embedding_dim')} "
                    f"!= embedder dim {embedder.dim}"
                )
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad store record") from exc
                kind = rec.get("kind")
                if kind == "note":
                    note = MemoryNote.from_dict(rec)
                    store.notes[note.id] = note
                elif kind == "link":
                    store.notes[rec["src"]].links.append(rec["dst"])
                elif kind == "counters":
                    store.notes_seen = rec["notes_seen"]
                    store.notes_added = rec["notes_added"]
                    store.evolution_ops = rec["evolution_ops"]
                    store.evolved_memory_ids = list(rec["evolved_memory_ids"])
                    store.strengthen_distances = list(rec["strengthen_distances"])
                    store.update_distances = list(rec["update_distances"])
                    store._seq = rec.get("seq", len(store.notes))
                else:
                    raise FormatError(f"{path}:{lineno}: unknown record kind {kind!r}")
        return store

    def iter_notes(self) -> Iterable[MemoryNote]:
        return iter(self.notes.values())


def read_store_header(path) -> dict:
    """Peek a store file's header without loading notes."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    try:
        header = json.loads(first)
    except ValueError as exc:
        raise FormatError(f"{path}: corrupted store header") from exc
    if not isinstance(header, dict) or header.get("kind") != "header":
        raise FormatError(f"{path}: first record is not a store header")
    return header
