"""Dataset ingestion, answer scoring, and memory-dynamics statistics.

Scoring is deliberately simple and documented rather than a clone of any
official evaluator: answers are unicode-normalized, trimmed, lowercased,
unquoted and whitespace-collapsed; numeric-looking values compare with an
absolute tolerance of 1e-6; multi-value answers split on ``|`` and compare
as multisets.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from statistics import median

from maple.errors import FormatError
from maple.memory import ErrorType, MemoryStore
from maple.orchestrator import AnswerRecord, Task
from maple.table import Table

logger = logging.getLogger(__name__)

NUMERIC_TOLERANCE = 1e-6
MULTI_VALUE_SEPARATOR = "|"


class TaskKind(str, Enum):
    QA = "qa"
    FACT_VERIFICATION = "fact_verification"


@dataclass(frozen=True)
class TaskRecord:
    id: str
    table: Table
    question: str
    answers: tuple[str, ...]
    task_kind: TaskKind = TaskKind.QA

    def __post_init__(self):
        object.__setattr__(self, "answers", tuple(str(a) for a in self.answers))
        if not self.answers:
            raise ValueError(f"task {self.id}: answers must be non-empty")
        if self.task_kind is TaskKind.FACT_VERIFICATION:
            bad = [a for a in self.answers if a.strip().lower() not in ("yes", "no")]
            if bad:
                raise ValueError(f"task {self.id}: fact labels must be yes/no, got {bad}")

    def gold_string(self) -> str:
        return MULTI_VALUE_SEPARATOR.join(self.answers)


# -- answer normalization ----------------------------------------------------


def normalize_value(text: str) -> str:
    s = unicodedata.normalize("NFKC", str(text)).strip().lower()
    while len(s) >= 2 and s[0] == s[-1] and s[0] in ("'", '"'):
        s = s[1:-1].strip()
    return " ".join(s.split())


def _as_number(s: str) -> float | None:
    try:
        value = float(s)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _values_equal(a: str, b: str) -> bool:
    na, nb = _as_number(a), _as_number(b)
    if na is not None and nb is not None:
        return abs(na - nb) <= NUMERIC_TOLERANCE
    return a == b


def _multiset_match(pred: list[str], gold: list[str]) -> bool:
    # tolerance is not transitive, so a greedy pairing can miss valid
    # assignments; search for a perfect matching instead (answers are short)
    used = [False] * len(gold)

    def place(i: int) -> bool:
        if i == len(pred):
            return True
        for j, g in enumerate(gold):
            if not used[j] and _values_equal(pred[i], g):
                used[j] = True
                if place(i + 1):
                    return True
                used[j] = False
        return False

    return place(0)


def denotation_match(predicted: str, gold: list[str] | tuple[str, ...]) -> bool:
    """Surface-form-insensitive answer match.

    Both sides split on ``|`` and compare as multisets under the
    normalization pipeline; numeric values compare with tolerance.
    """
    pred_parts = [normalize_value(p) for p in str(predicted).split(MULTI_VALUE_SEPARATOR)]
    gold_parts = [
        normalize_value(piece)
        for item in gold
        for piece in str(item).split(MULTI_VALUE_SEPARATOR)
    ]
    if len(pred_parts) != len(gold_parts):
        return False
    return _multiset_match(pred_parts, gold_parts)


def exact_match(predicted: str, gold: str) -> bool:
    """Binary yes/no match; anything else counts as incorrect and is logged."""
    p = normalize_value(predicted)
    g = normalize_value(gold)
    if p not in ("yes", "no"):
        logger.warning("invalid label %r (expected yes/no); counted incorrect", predicted)
        return False
    return p == g


def record_matches(record: AnswerRecord, task: TaskRecord) -> bool:
    if task.task_kind is TaskKind.FACT_VERIFICATION:
        return exact_match(record.model_answer, task.answers[0])
    return denotation_match(record.model_answer, list(task.answers))


@dataclass(frozen=True)
class EvalRow:
    task_id: str
    predicted: str
    gold: str
    correct: bool


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]

    @property
    def total(self) -> int:
        return len(self.rows)

    @property
    def correct(self) -> int:
        return sum(1 for r in self.rows if r.correct)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


def evaluate_records(records: list[AnswerRecord], tasks: list[TaskRecord]) -> EvalReport:
    by_id = {t.id: t for t in tasks}
    rows = []
    for record in records:
        task = by_id.get(record.task_id)
        if task is None:
            raise FormatError(f"record references unknown task id {record.task_id!r}")
        rows.append(
            EvalRow(
                task_id=record.task_id,
                predicted=record.model_answer,
                gold=task.gold_string(),
                correct=record_matches(record, task),
            )
        )
    return EvalReport(rows=tuple(rows))


# -- memory statistics --------------------------------------------------------


@dataclass(frozen=True)
class MemoryStats:
    """Lifetime memory dynamics; ratios are fractions, not percents."""

    memory_count: int
    memory_ratio: float
    evolution_count: int
    evolution_ratio: float
    evolved_memories: int
    evolution_efficiency: float
    median_strengthen_distance: float
    median_update_distance: float


def stats_from_counts(
    memory_count: int,
    evolution_count: int,
    evolved_memories: int,
    samples_processed: int,
    strengthen_distances: tuple[float, ...] = (),
    update_distances: tuple[float, ...] = (),
) -> MemoryStats:
    return MemoryStats(
        memory_count=memory_count,
        memory_ratio=memory_count / samples_processed if samples_processed else 0.0,
        evolution_count=evolution_count,
        evolution_ratio=evolution_count / memory_count if memory_count else 0.0,
        evolved_memories=evolved_memories,
        evolution_efficiency=evolved_memories / evolution_count if evolution_count else 0.0,
        median_strengthen_distance=median(strengthen_distances) if strengthen_distances else 0.0,
        median_update_distance=median(update_distances) if update_distances else 0.0,
    )


def compute_memory_stats(store: MemoryStore, samples_processed: int) -> MemoryStats:
    return stats_from_counts(
        memory_count=store.notes_added,
        evolution_count=store.evolution_ops,
        evolved_memories=len(store.evolved_memory_ids),
        samples_processed=samples_processed,
        strengthen_distances=tuple(store.strengthen_distances),
        update_distances=tuple(store.update_distances),
    )


ERROR_TYPE_ORDER = (
    ErrorType.LOGICAL_REASONING,
    ErrorType.COUNTING_AGGREGATION,
    ErrorType.FORMAT_TEMPORAL,
    ErrorType.INCOMPLETE_EXTRACTION,
    ErrorType.CALCULATION_COMPARISON,
    ErrorType.OTHER,
)


@dataclass(frozen=True)
class ErrorDistribution:
    """Counts and proportions over non-``none`` error types."""

    counts: dict

    def __post_init__(self):
        cleaned = {t: int(self.counts.get(t, 0)) for t in ERROR_TYPE_ORDER}
        object.__setattr__(self, "counts", cleaned)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def proportions(self) -> dict:
        total = self.total
        if not total:
            return {t: 0.0 for t in ERROR_TYPE_ORDER}
        return {t: self.counts[t] / total for t in ERROR_TYPE_ORDER}


def error_distribution(store: MemoryStore) -> ErrorDistribution:
    counts: dict = {}
    for note in store.iter_notes():
        if note.error_type is not ErrorType.NONE:
            counts[note.error_type] = counts.get(note.error_type, 0) + 1
    return ErrorDistribution(counts=counts)


# -- dataset ingestion --------------------------------------------------------


class DatasetFormat(str, Enum):
    NORMALIZED_JSONL = "normalized_jsonl"
    WIKITQ_TSV = "wikitq_tsv"
    TABFACT_JSON = "tabfact_json"


def ingest(path, fmt: DatasetFormat | str) -> list[TaskRecord]:
    fmt = DatasetFormat(fmt)
    path = Path(path)
    if fmt is DatasetFormat.NORMALIZED_JSONL:
        return _ingest_normalized(path)
    if fmt is DatasetFormat.WIKITQ_TSV:
        return _ingest_wikitq(path)
    return _ingest_tabfact(path)


def _ingest_normalized(path: Path) -> list[TaskRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                table = Table(columns=data["table"]["columns"], rows=data["table"]["rows"])
                records.append(
                    TaskRecord(
                        id=str(data["id"]),
                        table=table,
                        question=data["question"],
                        answers=tuple(str(a) for a in data["answers"]),
                        task_kind=TaskKind(data.get("task_kind", "qa")),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return records


def _read_delimited_table(table_path: Path, delimiter: str) -> Table:
    with open(table_path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    if not rows:
        raise FormatError(f"{table_path}: empty table file")
    header, body = rows[0], rows[1:]
    width = len(header)
    fixed = []
    for row in body:
        if len(row) < width:
            row = row + [""] * (width - len(row))
        elif len(row) > width:
            row = row[:width]
        fixed.append([c.replace("\n", " ").replace("\r", " ") for c in row])
    header = [c.replace("\n", " ").replace("\r", " ") or f"col{i}" for i, c in enumerate(header)]
    return Table(columns=header, rows=fixed)


def _ingest_wikitq(path: Path) -> list[TaskRecord]:
    """Tab-separated rows of (id, utterance, context csv path, targetValue).

    The context path resolves relative to the dataset file's directory;
    multi-value targets use ``|``.
    """
    root = path.parent
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if lineno == 1 and parts[0] == "id":
                continue
            if len(parts) < 4:
                raise FormatError(f"{path}: line {lineno}: expected 4 tab-separated fields")
            qid, utterance, context, target = parts[0], parts[1], parts[2], parts[3]
            table_path = root / context
            try:
                table = _read_delimited_table(table_path, ",")
            except OSError as exc:
                raise FormatError(f"{path}: line {lineno}: cannot read table {context!r}: {exc}") from exc
            try:
                records.append(
                    TaskRecord(
                        id=qid,
                        table=table,
                        question=utterance,
                        answers=tuple(target.split(MULTI_VALUE_SEPARATOR)),
                        task_kind=TaskKind.QA,
                    )
                )
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return records


def _ingest_tabfact(path: Path) -> list[TaskRecord]:
    """JSON mapping of table file -> [statements, labels, caption].

    Table files live under ``all_csv/`` next to the dataset file and are
    ``#``-delimited; label 1 means entailed ("yes"), 0 refuted ("no").
    """
    root = path.parent
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except ValueError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: expected an object keyed by table id")
    records = []
    for table_id in sorted(data):
        entry = data[table_id]
        try:
            statements, labels = entry[0], entry[1]
        except (IndexError, TypeError) as exc:
            raise FormatError(f"{path}: record {table_id!r}: {exc}") from exc
        if len(statements) != len(labels):
            raise FormatError(
                f"{path}: record {table_id!r}: {len(statements)} statements "
                f"vs {len(labels)} labels"
            )
        table_path = root / "all_csv" / table_id
        try:
            table = _read_delimited_table(table_path, "#")
        except OSError as exc:
            raise FormatError(f"{path}: record {table_id!r}: cannot read table: {exc}") from exc
        for i, (statement, label) in enumerate(zip(statements, labels)):
            records.append(
                TaskRecord(
                    id=f"{table_id}-{i}",
                    table=table,
                    question=str(statement),
                    answers=("yes" if int(label) == 1 else "no",),
                    task_kind=TaskKind.FACT_VERIFICATION,
                )
            )
    return records


def tasks_from_records(records: list[TaskRecord]) -> list[Task]:
    """Adapt dataset records to orchestrator tasks."""
    return [
        Task(
            task_id=r.id,
            table=r.table,
            question=r.question,
            ground_truth=r.gold_string(),
        )
        for r in records
    ]


def load_records(path) -> list[AnswerRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(AnswerRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return records


def save_records(records: list[AnswerRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
