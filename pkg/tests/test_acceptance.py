"""Acceptance suite: one test per release criterion, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the line-per-criterion
output inline.
"""

import json
import os
import socket
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import (
    GOLDEN_DIR,
    DATA_DIR,
    FixedEmbedder,
    ScriptedBackend,
    checker_text,
    make_note,
    solver_text,
    unit_vectors,
)
from denotation_reference import ref_denotation, ref_exact
from maple.agents import EvolutionDecision, parse_checker_response
from maple.backend import HashEmbedder, cosine_distance
from maple.cli import main
from maple.clock import TickClock
from maple.evaluation import denotation_match, exact_match, stats_from_counts
from maple.memory import MemoryStore, RetrievalConfig
from maple.orchestrator import EngineConfig, RunMode, Task, TerminalReason, run_task
from maple.table import Table
from test_cli import write_dataset, write_transcript


@contextmanager
def criterion(name: str, budget_seconds: float):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"[FAIL] {name}")
        raise
    elapsed = time.perf_counter() - start
    assert elapsed < budget_seconds, f"{name}: {elapsed:.2f}s exceeded {budget_seconds}s"
    print(f"[PASS] {name} ({elapsed:.2f}s)")


def test_golden_transcript_replay(tmp_path, monkeypatch, capsys):
    def no_network(*args, **kwargs):
        raise AssertionError("network use during replay")

    monkeypatch.setattr(socket.socket, "connect", no_network)
    monkeypatch.setattr(socket, "create_connection", no_network)

    with criterion("golden transcript replay", 1.0):
        out = tmp_path / "out"
        code = main(
            [
                "replay",
                str(GOLDEN_DIR / "transcript.jsonl"),
                str(GOLDEN_DIR / "task.jsonl"),
                "--out",
                str(out),
            ]
        )
        stdout = capsys.readouterr().out
        assert code == 0
        assert "final answer: Eric Wynalda" in stdout

        record = json.loads((out / "record.json").read_text())
        assert record["model_answer"] == "Eric Wynalda"
        assert record["outer_rounds_used"] == 2
        assert record["accepted_by_checker"] is True

        pool = [json.loads(ln) for ln in (out / "pool_log.jsonl").read_text().splitlines()]
        totals = [e["payload"]["total_score"] for e in pool if e["kind"] == "checker_feedback"]
        assert totals == [4, 6]
        reflections = [e for e in pool if e["kind"] == "reflection"]
        assert len(reflections) == 1

        store_lines = [json.loads(ln) for ln in (out / "store.jsonl").read_text().splitlines()]
        notes = [r for r in store_lines if r["kind"] == "note"]
        counters = next(r for r in store_lines if r["kind"] == "counters")
        assert len(notes) == 1
        assert notes[0]["error_type"] == "none"
        assert counters["notes_added"] == 1
        assert counters["evolution_ops"] == 0  # decision was should_evolve=false
        assert "added=True evolved=False" in stdout


def test_checker_gate_property():
    with criterion("checker gate: accept iff every criterion scores 2", 1.0):
        for a in (0, 1, 2):
            for b in (0, 1, 2):
                for c in (0, 1, 2):
                    feedback = parse_checker_response(checker_text((a, b, c)))
                    assert feedback.total_score == a + b + c
                    assert feedback.is_accepted == ((a, b, c) == (2, 2, 2))


def test_retrieval_oracle_equivalence():
    with criterion("retrieval equals brute-force scan on 200 random stores", 30.0):
        dim = 12
        rng = np.random.default_rng(2024)
        embedder = HashEmbedder(dim=dim)
        table = Table(columns=["player", "goals"])
        question = "who scored the most goals"
        solver_query = embedder.embed(table.header_line() + "\n" + question)

        for trial in range(200):
            n = int(rng.integers(0, 1001))
            store = MemoryStore(embedder)  # same embedder the oracle queries with
            for i, vec in enumerate(unit_vectors(n, dim, seed=trial, clusters=8), start=1):
                store.add(make_note(i, vec))
            cfg = RetrievalConfig(
                k=int(rng.integers(1, 11)),
                k_min=0,
                delta_solver=float(rng.uniform(0.0, 1.0)),
                delta_archiver=float(rng.uniform(0.0, 1.0)),
            )

            def oracle(query, delta, k, exclude=None):
                scored = []
                for nid in sorted(store.notes):
                    if nid == exclude:
                        continue
                    d = cosine_distance(query, store.notes[nid].embedding)
                    if d <= delta:
                        scored.append((d, nid))
                scored.sort()
                return [(nid, d) for d, nid in scored[:k]]

            got = store.retrieve_solver(table, question, cfg)
            assert [(h.note_id, h.distance) for h in got.hits] == oracle(
                solver_query, cfg.delta_solver, cfg.k
            )

            probe_vec = unit_vectors(1, dim, seed=100000 + trial)[0]
            probe = make_note(n + 1, probe_vec, id="probe")
            got = store.retrieve_archiver(probe, cfg)
            assert [(h.note_id, h.distance) for h in got.hits] == oracle(
                probe.embedding, cfg.delta_archiver, cfg.k, exclude="probe"
            )


def test_density_filter_monotonicity():
    with criterion("density filter: notes added non-increasing in delta", 30.0):
        dim = 12
        stream = unit_vectors(500, dim, seed=77, clusters=12)
        no_evolve = EvolutionDecision(should_evolve=False)
        added = []
        for delta in (0.3, 0.5, 0.7, 0.9, 1.0):
            store = MemoryStore(FixedEmbedder(dim))
            cfg = RetrievalConfig(k=5, k_min=2, delta_archiver=delta)
            for i, vec in enumerate(stream):
                store.integrate(make_note(i, vec, id=""), cfg, lambda n, nb: no_evolve)
            assert store.notes_seen == 500
            added.append(store.notes_added)
        assert added == sorted(added, reverse=True), added
        assert added[0] > added[-1], added  # the trend is real, not flat


def test_memory_stats_formulas():
    with criterion("memory statistics formulas on reference counter sets", 1.0):
        qa = stats_from_counts(4078, 843, 981, 4344)
        assert qa.memory_ratio * 100 == pytest.approx(93.9, abs=0.1)
        assert qa.evolution_ratio * 100 == pytest.approx(20.7, abs=0.1)
        assert qa.evolution_efficiency == pytest.approx(1.16, abs=0.01)

        fv = stats_from_counts(1108, 710, 813, 2024)
        assert fv.memory_ratio * 100 == pytest.approx(54.7, abs=0.1)
        assert fv.evolution_ratio * 100 == pytest.approx(64.1, abs=0.1)
        assert fv.evolution_efficiency == pytest.approx(1.15, abs=0.01)


def test_budget_exhaustion_bound():
    with criterion("budget exhaustion: 3x2 budget makes exactly 6 solver calls", 1.0):
        backend = ScriptedBackend({"solver": [solver_text("<NOT READY>")]}, loop=True)
        run = run_task(
            Task(task_id="t", table=Table(columns=["a"], rows=[["1"]]), question="q?"),
            MemoryStore(FixedEmbedder(4)),
            backend,
            EngineConfig(max_inner_steps=3, max_outer_rounds=2),
            RunMode.INFERENCE,
        )
        assert backend.calls("solver") == 6
        assert backend.calls("checker") == 0
        assert run.record.terminal_reason is TerminalReason.BUDGET_EXHAUSTED


def test_evolution_application():
    with criterion("evolution: scripted decision mutates store exactly", 1.0):
        dim = 8
        vecs = unit_vectors(3, dim, seed=5)
        base = vecs[0]
        store = MemoryStore(FixedEmbedder(dim), clock=TickClock())
        store.add(make_note(1, base))
        store.add(make_note(2, base))
        untouched = store.get("m000002")
        untouched_embedding = untouched.embedding
        untouched_updated = untouched.updated_at
        target = store.get("m000001")
        old_embedding = target.embedding
        old_updated = target.updated_at

        decision = EvolutionDecision(
            should_evolve=True,
            actions=("strengthen", "update_neighbor"),
            suggested_connections=("m000001", "m000002"),
            new_context_neighborhood=("rewritten neighbor context",),
            new_tags_neighborhood=(("rewritten", "tags"),),
        )
        candidate = make_note(3, base, id="")
        # two same-position neighbors; k_min=3 keeps the density filter open
        outcome = store.integrate(
            candidate,
            RetrievalConfig(k=5, k_min=3, delta_archiver=0.7),
            lambda n, nb: decision,
        )

        assert outcome.added and outcome.evolved
        assert outcome.links_added == 2
        assert outcome.neighbors_updated == 1
        assert store.get(candidate.id).links == ["m000001", "m000002"]
        assert target.context == "rewritten neighbor context"
        assert target.tags == ["rewritten", "tags"]
        assert target.embedding != old_embedding
        assert target.updated_at != old_updated
        assert untouched.embedding == untouched_embedding
        assert untouched.updated_at == untouched_updated
        assert candidate.id in store.notes  # original note persisted
        assert store.evolution_ops == 1
        assert sorted(store.evolved_memory_ids) == sorted([candidate.id, "m000001"])


def test_run_determinism(tmp_path, monkeypatch, capsys):
    with criterion("replay runs are byte-identical; 4 workers match 1", 30.0):
        def run_once(base, workers=1):
            base.mkdir(parents=True, exist_ok=True)
            write_dataset(base / "data.jsonl")
            write_transcript(base / "transcript.jsonl")
            monkeypatch.chdir(base)
            code = main(
                [
                    "run",
                    "--backend", "replay",
                    "--transcript", "transcript.jsonl",
                    "--dataset", "data.jsonl",
                    "--mode", "inference",
                    "--output-dir", "out",
                    "--workers", str(workers),
                ]
            )
            assert code == 0
            code = main(
                ["eval", "out/records.jsonl", "data.jsonl", "--out", "out"]
            )
            assert code == 0
            return base / "out"

        out_a = run_once(tmp_path / "a")
        out_b = run_once(tmp_path / "b")
        for name in ("records.jsonl", "manifest.json", "eval.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
        for log in sorted((out_a / "logs").iterdir()):
            assert log.read_bytes() == (out_b / "logs" / log.name).read_bytes()

        out_4 = run_once(tmp_path / "c", workers=4)
        assert (out_a / "records.jsonl").read_bytes() == (out_4 / "records.jsonl").read_bytes()


def test_metric_fixtures():
    with criterion("scoring passes the frozen 50-case and 10-case fixtures", 1.0):
        denotation_cases = json.loads((DATA_DIR / "denotation_cases.json").read_text())
        assert len(denotation_cases) == 50
        for case in denotation_cases:
            got = denotation_match(case["predicted"], case["gold"])
            assert got == case["expected"], case
            assert got == ref_denotation(case["predicted"], case["gold"]), case

        exact_cases = json.loads((DATA_DIR / "exact_cases.json").read_text())
        assert len(exact_cases) == 10
        for case in exact_cases:
            got = exact_match(case["predicted"], case["gold"])
            assert got == case["expected"], case
            assert got == ref_exact(case["predicted"], case["gold"]), case


@pytest.mark.skipif(
    not os.environ.get("MAPLE_SMOKE_BASE_URL"),
    reason="live smoke needs MAPLE_SMOKE_BASE_URL (and MAPLE_API_KEY if required)",
)
def test_live_smoke(tmp_path):
    """Optional: >= 20 tasks against a reachable endpoint, no protocol errors."""
    from maple.backend import OpenAIBackend
    from maple.evaluation import ingest, tasks_from_records
    from maple.orchestrator import run_dataset

    base_url = os.environ["MAPLE_SMOKE_BASE_URL"]
    chat_model = os.environ.get("MAPLE_SMOKE_CHAT_MODEL", "default")
    embed_model = os.environ.get("MAPLE_SMOKE_EMBED_MODEL", "")

    dataset = tmp_path / "smoke.jsonl"
    rows = []
    for i in range(20):
        rows.append(
            {
                "id": f"s{i}",
                "table": {
                    "columns": ["player", "goals"],
                    "rows": [["ann", str(3 + i)], ["bo", str(5 + i)]],
                },
                "question": "who scored the most goals?",
                "answers": ["bo"],
            }
        )
    dataset.write_text("\n".join(json.dumps(r) for r in rows) + "\n")

    backend = OpenAIBackend(base_url, chat_model, embed_model or None)
    embedder = (
        OpenAIBackend(base_url, chat_model, embed_model) if embed_model else HashEmbedder(256)
    )
    store = MemoryStore(embedder)
    tasks = tasks_from_records(ingest(dataset, "normalized_jsonl"))
    runs = run_dataset(tasks, store, backend, EngineConfig(), RunMode.MEMORY_BUILDING)
    assert len(runs) == 20
    protocol_failures = [
        r.record.task_id
        for r in runs
        if r.record.terminal_reason is TerminalReason.BACKEND_FAILURE
    ]
    assert not protocol_failures, protocol_failures
    assert store.notes_added >= 1
