"""Answer scoring, memory statistics, and dataset ingestion."""

import json

import pytest

from conftest import DATA_DIR, FixedEmbedder, make_note, unit_vectors
from denotation_reference import ref_denotation, ref_exact
from maple.errors import FormatError
from maple.evaluation import (
    DatasetFormat,
    ErrorDistribution,
    TaskKind,
    TaskRecord,
    compute_memory_stats,
    denotation_match,
    error_distribution,
    evaluate_records,
    exact_match,
    ingest,
    load_records,
    normalize_value,
    save_records,
    stats_from_counts,
    tasks_from_records,
)
from maple.memory import ErrorType, MemoryStore
from maple.orchestrator import AnswerRecord, TerminalReason
from maple.table import Table


def answer_record(task_id, answer, accepted=True):
    return AnswerRecord(
        task_id=task_id,
        model_answer=answer,
        ground_truth=None,
        outer_rounds_used=1,
        inner_steps_used=1,
        accepted_by_checker=accepted,
        terminal_reason=TerminalReason.CHECKER_ACCEPTED
        if accepted
        else TerminalReason.BUDGET_EXHAUSTED,
    )


class TestDenotationMatch:
    def test_frozen_fixture(self):
        cases = json.loads((DATA_DIR / "denotation_cases.json").read_text())
        assert len(cases) == 50
        for case in cases:
            got = denotation_match(case["predicted"], case["gold"])
            assert got == case["expected"], case

    def test_agrees_with_reference_pipeline(self):
        cases = json.loads((DATA_DIR / "denotation_cases.json").read_text())
        for case in cases:
            assert denotation_match(case["predicted"], case["gold"]) == ref_denotation(
                case["predicted"], case["gold"]
            ), case

    def test_reflexive_under_normalization(self):
        for value in ("Eric Wynalda", "  5.0 ", '"x"', "a|b"):
            assert denotation_match(value, [value])

    def test_symmetric_value_comparison(self):
        assert denotation_match("5.0", ["5"]) and denotation_match("5", ["5.0"])

    def test_normalize_value(self):
        assert normalize_value('  "Mixed  CASE" ') == "mixed case"
        assert normalize_value("５") == "5"


class TestExactMatch:
    def test_frozen_fixture(self):
        cases = json.loads((DATA_DIR / "exact_cases.json").read_text())
        assert len(cases) == 10
        for case in cases:
            assert exact_match(case["predicted"], case["gold"]) == case["expected"], case
            assert ref_exact(case["predicted"], case["gold"]) == case["expected"], case

    def test_invalid_label_logged(self, caplog):
        with caplog.at_level("WARNING"):
            assert exact_match("entailed", "yes") is False
        assert "invalid label" in caplog.text


class TestMemoryStats:
    def test_qa_counter_set(self):
        stats = stats_from_counts(4078, 843, 981, 4344)
        assert stats.memory_ratio * 100 == pytest.approx(93.9, abs=0.1)
        assert stats.evolution_ratio * 100 == pytest.approx(20.7, abs=0.1)
        assert stats.evolution_efficiency == pytest.approx(1.16, abs=0.01)

    def test_fact_verification_counter_set(self):
        stats = stats_from_counts(1108, 710, 813, 2024)
        assert stats.memory_ratio * 100 == pytest.approx(54.7, abs=0.1)
        assert stats.evolution_ratio * 100 == pytest.approx(64.1, abs=0.1)
        assert stats.evolution_efficiency == pytest.approx(1.15, abs=0.01)

    def test_zero_counters(self):
        stats = stats_from_counts(0, 0, 0, 0)
        assert stats.memory_ratio == 0.0
        assert stats.evolution_ratio == 0.0
        assert stats.evolution_efficiency == 0.0

    def test_median_definition(self):
        stats = stats_from_counts(1, 1, 1, 1, strengthen_distances=(0.2, 0.3, 0.4))
        assert stats.median_strengthen_distance == pytest.approx(0.3)

    def test_from_store_counters(self):
        store = MemoryStore(FixedEmbedder(4))
        store.notes_added = 10
        store.evolution_ops = 4
        store.evolved_memory_ids = ["a"] * 5
        store.strengthen_distances = [0.1, 0.2]
        stats = compute_memory_stats(store, samples_processed=20)
        assert stats.memory_count == 10
        assert stats.memory_ratio == pytest.approx(0.5)
        assert stats.evolved_memories == 5
        assert stats.median_strengthen_distance == pytest.approx(0.15)


class TestErrorDistribution:
    def _store_with_errors(self, kinds):
        store = MemoryStore(FixedEmbedder(4))
        vecs = unit_vectors(len(kinds), 4, seed=2)
        for i, kind in enumerate(kinds, start=1):
            reason = "none" if kind is ErrorType.NONE else "something broke"
            store.add(make_note(i, vecs[i - 1], error_type=kind, error_reason=reason))
        return store

    def test_counts_and_proportions(self):
        store = self._store_with_errors(
            [ErrorType.LOGICAL_REASONING, ErrorType.LOGICAL_REASONING,
             ErrorType.COUNTING_AGGREGATION, ErrorType.COUNTING_AGGREGATION,
             ErrorType.FORMAT_TEMPORAL, ErrorType.NONE]
        )
        dist = error_distribution(store)
        assert dist.total == 5
        props = dist.proportions()
        assert props[ErrorType.LOGICAL_REASONING] == pytest.approx(0.4)
        assert props[ErrorType.COUNTING_AGGREGATION] == pytest.approx(0.4)
        assert props[ErrorType.FORMAT_TEMPORAL] == pytest.approx(0.2)
        assert sum(props.values()) == pytest.approx(1.0)

    def test_empty_store(self):
        dist = error_distribution(MemoryStore(FixedEmbedder(4)))
        assert dist.total == 0
        assert all(v == 0.0 for v in dist.proportions().values())


class TestTaskRecord:
    def test_requires_answers(self):
        with pytest.raises(ValueError, match="non-empty"):
            TaskRecord(id="x", table=Table(columns=["a"]), question="q", answers=())

    def test_fact_labels_constrained(self):
        with pytest.raises(ValueError, match="yes/no"):
            TaskRecord(
                id="x", table=Table(columns=["a"]), question="q",
                answers=("entailed",), task_kind=TaskKind.FACT_VERIFICATION,
            )


class TestIngest:
    def test_normalized_jsonl(self, tmp_path):
        path = tmp_path / "data.jsonl"
        rows = [
            {"id": "a", "table": {"columns": ["x"], "rows": [["1"]]},
             "question": "q1", "answers": ["1"]},
            {"id": "b", "table": {"columns": ["x"], "rows": []},
             "question": "q2", "answers": ["yes"], "task_kind": "fact_verification"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        records = ingest(path, "normalized_jsonl")
        assert len(records) == 2
        assert records[1].task_kind is TaskKind.FACT_VERIFICATION

    def test_missing_question_located(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "table": {"columns": ["x"], "rows": []}, "answers": ["1"]}\n')
        with pytest.raises(FormatError, match="line 1"):
            ingest(path, "normalized_jsonl")

    def test_wikitq_layout_resolves_csv(self):
        records = ingest(DATA_DIR / "wikitq" / "sample.tsv", DatasetFormat.WIKITQ_TSV)
        assert len(records) == 2
        first = records[0]
        assert first.id == "nu-100"
        assert first.table.columns == ("Pos", "Driver", "Constructor", "Laps", "Time/Retired")
        assert first.table.rows[0][1] == "Felipe Massa"
        assert first.answers == ("Felipe Massa",)
        assert first.task_kind is TaskKind.QA

    def test_wikitq_missing_table_located(self, tmp_path):
        path = tmp_path / "s.tsv"
        path.write_text("id\tutterance\tcontext\ttargetValue\nnu-1\tq?\tcsv/none.csv\tx\n")
        with pytest.raises(FormatError, match="line 2"):
            ingest(path, "wikitq_tsv")

    def test_tabfact_layout(self):
        records = ingest(DATA_DIR / "tabfact" / "examples.json", "tabfact_json")
        assert len(records) == 2
        assert all(r.task_kind is TaskKind.FACT_VERIFICATION for r in records)
        assert records[0].answers == ("yes",)
        assert records[1].answers == ("no",)
        assert records[0].table.columns == ("match", "home", "score", "away")

    def test_tasks_from_records_join_multivalue_gold(self):
        record = TaskRecord(
            id="a", table=Table(columns=["x"]), question="q", answers=("1", "2")
        )
        assert tasks_from_records([record])[0].ground_truth == "1|2"


class TestEvaluateRecords:
    def test_accuracy_and_rows(self):
        tasks = [
            TaskRecord(id=f"t{i}", table=Table(columns=["x"]), question="q",
                       answers=(str(i),))
            for i in range(10)
        ]
        records = [
            answer_record(f"t{i}", str(i) if i < 7 else "wrong") for i in range(10)
        ]
        report = evaluate_records(records, tasks)
        assert report.total == 10 and report.correct == 7
        assert report.accuracy == pytest.approx(0.7)

    def test_kind_dispatch(self):
        tasks = [
            TaskRecord(id="qa", table=Table(columns=["x"]), question="q", answers=("5",)),
            TaskRecord(id="fv", table=Table(columns=["x"]), question="s",
                       answers=("yes",), task_kind=TaskKind.FACT_VERIFICATION),
        ]
        records = [answer_record("qa", "5.0"), answer_record("fv", "YES ")]
        report = evaluate_records(records, tasks)
        assert report.correct == 2

    def test_unknown_task_id_rejected(self):
        with pytest.raises(FormatError, match="unknown task id"):
            evaluate_records([answer_record("ghost", "x")], [])

    def test_order_independence(self):
        tasks = [
            TaskRecord(id=f"t{i}", table=Table(columns=["x"]), question="q",
                       answers=(str(i),))
            for i in range(4)
        ]
        records = [answer_record(f"t{i}", str(i)) for i in range(4)]
        forward = evaluate_records(records, tasks).accuracy
        backward = evaluate_records(list(reversed(records)), tasks).accuracy
        assert forward == backward


class TestRecordIO:
    def test_round_trip(self, tmp_path):
        records = [answer_record("t1", "bo"), answer_record("t2", "ann", accepted=False)]
        path = tmp_path / "records.jsonl"
        save_records(records, path)
        assert load_records(path) == records
