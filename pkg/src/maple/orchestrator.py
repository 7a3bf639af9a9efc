"""Per-task reasoning loop and the dataset harness around it.

One task runs as nested loops: an outer round retrieves long-term
memories, resets the table to the original, and gives the solver a fresh
inner budget of think-act steps. A concrete solver answer goes to the
checker; full score accepts it, anything less produces a reflection that
is injected into the next outer round. When every budget is spent, the
last concrete answer (or the literal ``UNANSWERED``) is returned.

In memory-building mode a completed task is summarized into a memory note
and handed to the store's density-filtered integration; in inference mode
the store is read-only.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from maple.agents import (
    SolverTrace,
    archiver_evo_call,
    archiver_sum_call,
    checker_call,
    reflector_call,
    solver_call,
)
from maple.backend import ChatBackend, ChatRequest
from maple.clock import utc_now_iso
from maple.errors import BackendError, ConfigError, MapleError, ParseError, ReplayMiss, TransportError
from maple.memory import IntegrationOutcome, MemoryStore, RetrievalConfig
from maple.pool import Budget, EntryKind, FinalAnswer, TaskContext, view_latest_reflection, view_trace
from maple.table import Table, TableState, apply_intermediate

logger = logging.getLogger(__name__)

UNANSWERED = "UNANSWERED"


class RunMode(str, Enum):
    MEMORY_BUILDING = "memory_building"
    INFERENCE = "inference"


class TerminalReason(str, Enum):
    CHECKER_ACCEPTED = "checker_accepted"
    BUDGET_EXHAUSTED = "budget_exhausted"
    BACKEND_FAILURE = "backend_failure"


@dataclass(frozen=True)
class Task:
    task_id: str
    table: Table
    question: str
    ground_truth: str | None = None


@dataclass(frozen=True)
class AnswerRecord:
    task_id: str
    model_answer: str
    ground_truth: str | None
    outer_rounds_used: int
    inner_steps_used: int
    accepted_by_checker: bool
    terminal_reason: TerminalReason

    def __post_init__(self):
        if self.accepted_by_checker and self.terminal_reason is not TerminalReason.CHECKER_ACCEPTED:
            raise ValueError("accepted answers must terminate as checker_accepted")
        if not self.model_answer and self.terminal_reason is not TerminalReason.BACKEND_FAILURE:
            raise ValueError("model_answer may be empty only on backend failure")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "model_answer": self.model_answer,
            "ground_truth": self.ground_truth,
            "outer_rounds_used": self.outer_rounds_used,
            "inner_steps_used": self.inner_steps_used,
            "accepted_by_checker": self.accepted_by_checker,
            "terminal_reason": self.terminal_reason.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnswerRecord":
        return cls(
            task_id=data["task_id"],
            model_answer=data["model_answer"],
            ground_truth=data.get("ground_truth"),
            outer_rounds_used=data["outer_rounds_used"],
            inner_steps_used=data["inner_steps_used"],
            accepted_by_checker=data["accepted_by_checker"],
            terminal_reason=TerminalReason(data["terminal_reason"]),
        )


@dataclass(frozen=True)
class EngineConfig:
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    max_inner_steps: int = 5
    max_outer_rounds: int = 5
    backend_retries: int = 2
    decode_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.max_inner_steps < 1 or self.max_outer_rounds < 1:
            raise ConfigError("budgets must be >= 1")
        if self.backend_retries < 0:
            raise ConfigError("backend_retries must be >= 0")


@dataclass
class TaskRun:
    """Everything one task produced: the record, its pool, and (in
    memory-building mode) the integration outcome."""

    record: AnswerRecord
    context: TaskContext
    integration: IntegrationOutcome | None = None


class _RetryingBackend:
    """Retries transport failures a bounded number of times."""

    def __init__(self, inner: ChatBackend, retries: int):
        self._inner = inner
        self._retries = retries

    def identity(self) -> str:
        return self._inner.identity()

    def chat(self, request: ChatRequest) -> str:
        attempts = self._retries + 1
        for attempt in range(attempts):
            try:
                return self._inner.chat(request)
            except TransportError as exc:
                if attempt == attempts - 1:
                    raise
                logger.warning("transport error (attempt %d/%d): %s", attempt + 1, attempts, exc)
        raise AssertionError("unreachable")


def _scoped_backend(backend: ChatBackend, task_id: str) -> ChatBackend:
    if hasattr(backend, "for_task"):
        return backend.for_task(task_id)
    return backend


def run_task(
    task: Task,
    store: MemoryStore,
    backend: ChatBackend,
    config: EngineConfig | None = None,
    mode: RunMode = RunMode.INFERENCE,
    clock: Callable[[], str] | None = None,
) -> TaskRun:
    """Execute the reasoning loop for one task."""
    config = config or EngineConfig()
    clock = clock or utc_now_iso
    if mode is RunMode.MEMORY_BUILDING and not task.ground_truth:
        raise ConfigError(f"task {task.task_id}: memory building requires ground truth")

    chat = _RetryingBackend(_scoped_backend(backend, task.task_id), config.backend_retries)
    budget = Budget(
        max_inner_steps=config.max_inner_steps,
        max_outer_rounds=config.max_outer_rounds,
    )
    ctx = TaskContext(
        task_id=task.task_id,
        table_state=TableState.fresh(task.table),
        question=task.question,
        budget=budget,
        clock=clock,
    )
    ctx.publish("system", EntryKind.TABLE_SNAPSHOT, ctx.table_state)

    last_concrete: str | None = None
    solver_calls = 0
    rounds_used = 0
    try:
        for outer in range(1, config.max_outer_rounds + 1):
            rounds_used = outer
            budget.consume_outer()
            budget.reset_inner()
            ctx.publish("system", EntryKind.BUDGET_UPDATE, budget, round_index=outer)
            if outer > 1:
                # each retry round restarts from the original table
                ctx.table_state = ctx.table_state.reset()
                ctx.publish("system", EntryKind.TABLE_SNAPSHOT, ctx.table_state, round_index=outer)

            hits = store.retrieve_solver(task.table, task.question, config.retrieval)
            retrieved = [store.get(h.note_id) for h in hits.hits]
            reflection = view_latest_reflection(ctx)
            trace = SolverTrace(steps=[], round_index=outer)

            while budget.inner_remaining > 0:
                remaining = budget.inner_remaining
                budget.consume_inner()
                solver_calls += 1
                try:
                    step = solver_call(
                        chat, ctx.table_state, task.question, trace, remaining,
                        retrieved, reflection, config.decode_params,
                    )
                except ParseError as exc:
                    # malformed solver output burns the step; retry if budget allows
                    logger.warning("task %s: unparseable solver output: %s", task.task_id, exc)
                    continue
                trace.append(step)
                ctx.publish("solver", EntryKind.SOLVER_STEP, step, round_index=outer)

                if not step.is_ready:
                    try:
                        new_state = apply_intermediate(ctx.table_state, step.intermediate_block)
                    except ParseError as exc:
                        logger.warning(
                            "task %s: bad intermediate table kept out of state: %s",
                            task.task_id, exc,
                        )
                        continue
                    if new_state is not ctx.table_state:
                        ctx.table_state = new_state
                        ctx.publish("system", EntryKind.TABLE_SNAPSHOT, new_state, round_index=outer)
                    continue

                last_concrete = step.answer
                try:
                    feedback = checker_call(
                        chat, task.table, task.question, step.answer, config.decode_params
                    )
                except ParseError as exc:
                    # one checker call per round; a bad one forfeits the round
                    logger.warning("task %s: unparseable checker output: %s", task.task_id, exc)
                    break
                ctx.publish("checker", EntryKind.CHECKER_FEEDBACK, feedback, round_index=outer)

                if feedback.is_accepted:
                    ctx.publish(
                        "system", EntryKind.FINAL_ANSWER,
                        FinalAnswer(step.answer, TerminalReason.CHECKER_ACCEPTED.value),
                        round_index=outer,
                    )
                    record = AnswerRecord(
                        task_id=task.task_id,
                        model_answer=step.answer,
                        ground_truth=task.ground_truth,
                        outer_rounds_used=outer,
                        inner_steps_used=solver_calls,
                        accepted_by_checker=True,
                        terminal_reason=TerminalReason.CHECKER_ACCEPTED,
                    )
                    run = TaskRun(record=record, context=ctx)
                    _maybe_archive(run, task, store, chat, config, mode, outer)
                    return run

                try:
                    report = reflector_call(
                        chat, task.table, task.question, trace, step.answer, feedback,
                        config.decode_params,
                    )
                    ctx.publish("reflector", EntryKind.REFLECTION, report, round_index=outer)
                except ParseError as exc:
                    logger.warning("task %s: unparseable reflection dropped: %s", task.task_id, exc)
                break  # verdict reached; next outer round

        answer = last_concrete if last_concrete is not None else UNANSWERED
        ctx.publish(
            "system", EntryKind.FINAL_ANSWER,
            FinalAnswer(answer, TerminalReason.BUDGET_EXHAUSTED.value),
        )
        record = AnswerRecord(
            task_id=task.task_id,
            model_answer=answer,
            ground_truth=task.ground_truth,
            outer_rounds_used=rounds_used,
            inner_steps_used=solver_calls,
            accepted_by_checker=False,
            terminal_reason=TerminalReason.BUDGET_EXHAUSTED,
        )
        run = TaskRun(record=record, context=ctx)
        _maybe_archive(run, task, store, chat, config, mode, rounds_used)
        return run

    except (TransportError, BackendError, ReplayMiss) as exc:
        logger.error("task %s: backend failure: %s", task.task_id, exc)
        ctx.publish(
            "system", EntryKind.FINAL_ANSWER,
            FinalAnswer(last_concrete or "", TerminalReason.BACKEND_FAILURE.value),
        )
        record = AnswerRecord(
            task_id=task.task_id,
            model_answer=last_concrete or "",
            ground_truth=task.ground_truth,
            outer_rounds_used=rounds_used,
            inner_steps_used=solver_calls,
            accepted_by_checker=False,
            terminal_reason=TerminalReason.BACKEND_FAILURE,
        )
        return TaskRun(record=record, context=ctx)


def _maybe_archive(
    run: TaskRun,
    task: Task,
    store: MemoryStore,
    chat: ChatBackend,
    config: EngineConfig,
    mode: RunMode,
    last_round: int,
) -> None:
    """Summarize a completed task into the store (memory-building only)."""
    if mode is not RunMode.MEMORY_BUILDING:
        return
    try:
        trace = view_trace(run.context, round_index=last_round)
        reflection = view_latest_reflection(run.context)
        note = archiver_sum_call(
            chat, task.table, task.question, run.record.model_answer,
            task.ground_truth, trace, reflection, config.decode_params,
        )
        note.question_id = task.task_id
        note.question = task.question
        note.correct_answer = task.ground_truth or ""
        note.model_answer = run.record.model_answer
        run.integration = store.integrate(
            note,
            config.retrieval,
            decide=lambda n, neighbors: archiver_evo_call(chat, n, neighbors, config.decode_params),
        )
    except (ParseError, TransportError, BackendError, ReplayMiss) as exc:
        logger.warning("task %s: archiving failed, note dropped: %s", task.task_id, exc)


def run_dataset(
    tasks: Sequence[Task],
    store: MemoryStore,
    backend: ChatBackend,
    config: EngineConfig | None = None,
    mode: RunMode = RunMode.INFERENCE,
    workers: int = 1,
    clock_factory: Callable[[], Callable[[], str]] | None = None,
) -> list[TaskRun]:
    """Run a task list; results come back in task order.

    Memory building is strictly sequential (the store evolves in task
    order); inference may fan out across threads over the frozen store.
    ``clock_factory`` builds one timestamp source per task, keeping task
    logs identical regardless of worker interleaving.
    """
    config = config or EngineConfig()
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if mode is RunMode.MEMORY_BUILDING:
        if workers != 1:
            raise ConfigError("memory building requires workers=1")
        missing = [t.task_id for t in tasks if not t.ground_truth]
        if missing:
            raise ConfigError(f"memory building requires ground truth; missing for: {missing[:5]}")

    def one(task: Task) -> TaskRun:
        clock = clock_factory() if clock_factory else None
        try:
            return run_task(task, store, backend, config, mode, clock)
        except MapleError as exc:
            logger.error("task %s failed: %s", task.task_id, exc)
            record = AnswerRecord(
                task_id=task.task_id,
                model_answer="",
                ground_truth=task.ground_truth,
                outer_rounds_used=0,
                inner_steps_used=0,
                accepted_by_checker=False,
                terminal_reason=TerminalReason.BACKEND_FAILURE,
            )
            ctx = TaskContext(
                task_id=task.task_id,
                table_state=TableState.fresh(task.table),
                question=task.question,
                budget=Budget(config.max_inner_steps, config.max_outer_rounds),
                clock=clock or utc_now_iso,
            )
            return TaskRun(record=record, context=ctx)

    if workers == 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, tasks))


def dataset_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
