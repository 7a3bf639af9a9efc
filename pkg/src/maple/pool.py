"""Per-task shared working memory: a typed, append-only event log.

Every agent's input during one task is reconstructible from the pool, so a
task can be replayed offline from its exported log. Entries are never
edited or removed; views are pure projections.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from maple.agents import CheckerFeedback, ReflectionReport, SolverStep, SolverTrace
from maple.clock import utc_now_iso
from maple.errors import SchemaError
from maple.table import TableState, serialize_markdown


class EntryKind(str, Enum):
    TABLE_SNAPSHOT = "table_snapshot"
    SOLVER_STEP = "solver_step"
    CHECKER_FEEDBACK = "checker_feedback"
    REFLECTION = "reflection"
    BUDGET_UPDATE = "budget_update"
    FINAL_ANSWER = "final_answer"


@dataclass(frozen=True)
class FinalAnswer:
    answer: str
    terminal_reason: str

    def to_dict(self) -> dict:
        return {"answer": self.answer, "terminal_reason": self.terminal_reason}


@dataclass
class Budget:
    """Dual attempt budget: think-act steps per round, and retry rounds.

    The solver-visible attempt counter is the inner one; checker-failure
    retries consume the outer one.
    """

    max_inner_steps: int = 5
    max_outer_rounds: int = 5
    consumed_inner: int = 0
    consumed_outer: int = 0

    def __post_init__(self):
        if self.max_inner_steps < 1 or self.max_outer_rounds < 1:
            raise ValueError("budgets must be >= 1")
        self._check()

    def _check(self):
        if self.consumed_inner > self.max_inner_steps:
            raise ValueError("inner budget overrun")
        if self.consumed_outer > self.max_outer_rounds:
            raise ValueError("outer budget overrun")

    def consume_inner(self) -> None:
        self.consumed_inner += 1
        self._check()

    def consume_outer(self) -> None:
        self.consumed_outer += 1
        self._check()

    def reset_inner(self) -> None:
        self.consumed_inner = 0

    @property
    def inner_remaining(self) -> int:
        return self.max_inner_steps - self.consumed_inner

    def to_dict(self) -> dict:
        return {
            "max_inner_steps": self.max_inner_steps,
            "max_outer_rounds": self.max_outer_rounds,
            "consumed_inner": self.consumed_inner,
            "consumed_outer": self.consumed_outer,
        }

    def snapshot(self) -> "Budget":
        return Budget(**self.to_dict())


_PAYLOAD_TYPES = {
    EntryKind.TABLE_SNAPSHOT: TableState,
    EntryKind.SOLVER_STEP: SolverStep,
    EntryKind.CHECKER_FEEDBACK: CheckerFeedback,
    EntryKind.REFLECTION: ReflectionReport,
    EntryKind.BUDGET_UPDATE: Budget,
    EntryKind.FINAL_ANSWER: FinalAnswer,
}

AUTHORS = ("solver", "checker", "reflector", "archiver_sum", "archiver_evo", "system")


@dataclass(frozen=True)
class PoolEntry:
    seq: int
    author: str
    kind: EntryKind
    payload: object
    timestamp: str
    round_index: int | None = None


def _payload_to_dict(kind: EntryKind, payload) -> dict:
    if kind is EntryKind.TABLE_SNAPSHOT:
        return {
            "original": serialize_markdown(payload.original),
            "current": serialize_markdown(payload.current),
            "changed": payload.changed,
        }
    return payload.to_dict()


@dataclass
class TaskContext:
    """All working state for one task, including the event log."""

    task_id: str
    table_state: TableState
    question: str
    budget: Budget
    entries: list[PoolEntry] = field(default_factory=list)
    clock: Callable[[], str] = field(default=utc_now_iso, repr=False, compare=False)

    def publish(
        self,
        author: str,
        kind: EntryKind,
        payload,
        round_index: int | None = None,
    ) -> PoolEntry:
        """Append a typed entry with the next sequence number."""
        if author not in AUTHORS:
            raise SchemaError(f"unknown author: {author!r}")
        expected = _PAYLOAD_TYPES[kind]
        if not isinstance(payload, expected):
            raise SchemaError(
                f"{kind.value} payload must be {expected.__name__}, "
                f"got {type(payload).__name__}"
            )
        if kind is EntryKind.FINAL_ANSWER and any(
            e.kind is EntryKind.FINAL_ANSWER for e in self.entries
        ):
            raise SchemaError("a task records exactly one final answer")
        if kind is EntryKind.BUDGET_UPDATE:
            payload = payload.snapshot()
        entry = PoolEntry(
            seq=len(self.entries) + 1,
            author=author,
            kind=kind,
            payload=payload,
            timestamp=self.clock(),
            round_index=round_index,
        )
        self.entries.append(entry)
        return entry

    def export_lines(self) -> list[str]:
        """One JSON line per entry, for offline replay and statistics."""
        lines = []
        for e in self.entries:
            rec = {
                "seq": e.seq,
                "author": e.author,
                "kind": e.kind.value,
                "round_index": e.round_index,
                "timestamp": e.timestamp,
                "payload": _payload_to_dict(e.kind, e.payload),
            }
            lines.append(json.dumps(rec, ensure_ascii=False, sort_keys=True))
        return lines

    def export(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.export_lines():
                fh.write(line + "\n")


def append(ctx: TaskContext, author: str, kind: EntryKind, payload,
           round_index: int | None = None) -> TaskContext:
    """Functional-style alias for :meth:`TaskContext.publish`."""
    ctx.publish(author, kind, payload, round_index)
    return ctx


def view_trace(ctx: TaskContext, round_index: int | None = None) -> SolverTrace:
    """Solver steps in append order; optionally restricted to one round.

    Without a round, all steps are returned and the trace is labeled with
    the highest round seen (1 for an empty pool).
    """
    steps = [
        e for e in ctx.entries
        if e.kind is EntryKind.SOLVER_STEP
        and (round_index is None or e.round_index == round_index)
    ]
    label = round_index
    if label is None:
        rounds = [e.round_index for e in steps if e.round_index is not None]
        label = max(rounds) if rounds else 1
    return SolverTrace(steps=[e.payload for e in steps], round_index=label)


def view_latest_reflection(ctx: TaskContext) -> ReflectionReport | None:
    for e in reversed(ctx.entries):
        if e.kind is EntryKind.REFLECTION:
            return e.payload
    return None


def view_latest_feedback(ctx: TaskContext) -> CheckerFeedback | None:
    for e in reversed(ctx.entries):
        if e.kind is EntryKind.CHECKER_FEEDBACK:
            return e.payload
    return None


def view_checker_totals(ctx: TaskContext) -> list[int]:
    return [
        e.payload.total_score
        for e in ctx.entries
        if e.kind is EntryKind.CHECKER_FEEDBACK
    ]


def view_final_answer(ctx: TaskContext) -> FinalAnswer | None:
    for e in reversed(ctx.entries):
        if e.kind is EntryKind.FINAL_ANSWER:
            return e.payload
    return None
