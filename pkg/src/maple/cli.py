"""Operator entry point: run datasets, evaluate, report stats, replay.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click

from maple.backend import HashEmbedder, ReplayBackend, Transcript
from maple.clock import TickClock
from maple.config import load_run_config, make_chat_backend, make_embedder, make_store
from maple.errors import ConfigError, MapleError
from maple.evaluation import (
    DatasetFormat,
    compute_memory_stats,
    error_distribution,
    evaluate_records,
    ingest,
    load_records,
    save_records,
    tasks_from_records,
)
from maple.memory import MemoryStore, read_store_header
from maple.orchestrator import RunMode, dataset_digest, run_dataset, run_task
from maple.reporting import write_eval_csv, write_stats_report

_FORMATS = [f.value for f in DatasetFormat]


def _safe_name(task_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", task_id) or "task"


@click.group()
def cli():
    """Multi-agent table reasoning engine."""


@cli.command("run")
@click.option("--config", "config_path", default=None, help="YAML/JSON run config.")
@click.option("--dataset", default=None, help="Dataset path.")
@click.option("--dataset-format", default=None, type=click.Choice(_FORMATS))
@click.option("--mode", default=None, type=click.Choice(["inference", "memory_building"]))
@click.option("--backend", default=None, type=click.Choice(["openai", "replay"]))
@click.option("--transcript", default=None, help="Replay transcript path.")
@click.option("--base-url", default=None)
@click.option("--chat-model", default=None)
@click.option("--embed-model", default=None)
@click.option("--embedder", default=None, type=click.Choice(["hash", "openai"]))
@click.option("--embedding-dim", default=None, type=int)
@click.option("--store", default=None, help="Memory store path (loaded if present).")
@click.option("--output-dir", default=None)
@click.option("--workers", default=None, type=int)
@click.option("--k", default=None, type=int)
@click.option("--k-min", default=None, type=int)
@click.option("--delta-solver", default=None, type=float)
@click.option("--delta-archiver", default=None, type=float)
@click.option("--max-inner-steps", default=None, type=int)
@click.option("--max-outer-rounds", default=None, type=int)
def cmd_run(config_path, **flags):
    """Run every task in a dataset and write records, logs and a manifest."""
    cfg = load_run_config(config_path, flags)
    if not cfg.dataset:
        raise ConfigError("no dataset given (flag --dataset or config key 'dataset')")

    task_records = ingest(cfg.dataset, cfg.dataset_format)
    task_kinds = {r.task_kind.value for r in task_records}
    tasks = tasks_from_records(task_records)
    embedder = make_embedder(cfg)
    backend = make_chat_backend(cfg)
    deterministic = cfg.backend == "replay"
    store = make_store(cfg, embedder, clock=TickClock() if deterministic else None)
    notes_before = store.notes_added

    runs = run_dataset(
        tasks,
        store,
        backend,
        cfg.engine_config(task_kinds),
        cfg.run_mode(),
        workers=cfg.workers,
        clock_factory=TickClock if deterministic else None,
    )

    out = Path(cfg.output_dir)
    logs = out / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    save_records([r.record for r in runs], out / "records.jsonl")
    for run in runs:
        run.context.export(logs / f"{_safe_name(run.record.task_id)}.jsonl")

    if cfg.run_mode() is RunMode.MEMORY_BUILDING:
        store_path = Path(cfg.store) if cfg.store else out / "store.jsonl"
        store_path.parent.mkdir(parents=True, exist_ok=True)
        store.persist(store_path)
    manifest = {
        "config": cfg.to_dict(),
        "resolved_delta_solver": cfg.resolve_delta_solver(task_kinds),
        "dataset_sha256": dataset_digest(cfg.dataset),
        "backend": backend.identity(),
        "embedder": embedder.identity(),
        "tasks": len(tasks),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")

    accepted = sum(1 for r in runs if r.record.accepted_by_checker)
    click.echo(f"tasks: {len(runs)}")
    click.echo(f"accepted by checker: {accepted}")
    click.echo(f"notes added: {store.notes_added - notes_before}")
    click.echo(f"output: {out}")


@cli.command("eval")
@click.argument("records_path")
@click.argument("dataset_path")
@click.option("--dataset-format", default="normalized_jsonl", type=click.Choice(_FORMATS))
@click.option("--out", default=None, help="Directory for the per-task CSV report.")
def cmd_eval(records_path, dataset_path, dataset_format, out):
    """Score answer records against a dataset's gold answers."""
    records = load_records(records_path)
    tasks = ingest(dataset_path, dataset_format)
    report = evaluate_records(records, tasks)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_eval_csv(report, out_dir / "eval.csv")
    click.echo(f"tasks: {report.total}")
    click.echo(f"correct: {report.correct}")
    click.echo(f"accuracy {report.accuracy:.3f}")


@cli.command("stats")
@click.argument("store_path")
@click.option("--samples", default=None, type=int,
              help="Denominator for the memory ratio; defaults to notes seen.")
@click.option("--out", default="reports", help="Report directory.")
@click.option("--figures/--no-figures", default=True)
def cmd_stats(store_path, samples, out, figures):
    """Write memory-dynamics and error-distribution reports for a store."""
    header = read_store_header(store_path)
    embedder = HashEmbedder(dim=int(header["embedding_dim"]))
    store = MemoryStore.load(store_path, embedder)
    samples = samples if samples is not None else store.notes_seen
    stats = compute_memory_stats(store, samples)
    dist = error_distribution(store)
    paths = write_stats_report(stats, dist, out, with_figures=figures)
    click.echo(f"notes: {len(store)}  added: {store.notes_added}  seen: {store.notes_seen}")
    click.echo(
        f"memory ratio {stats.memory_ratio * 100:.1f}%  "
        f"evolution ratio {stats.evolution_ratio * 100:.1f}%  "
        f"efficiency {stats.evolution_efficiency:.2f}"
    )
    for name, p in paths.items():
        click.echo(f"{name}: {p}")


@cli.command("replay")
@click.argument("transcript_path")
@click.argument("task_path")
@click.option("--store", "store_path", default=None, help="Existing store to start from.")
@click.option("--out", default=None, help="Directory for the record and pool log.")
@click.option("--embedding-dim", default=256, type=int)
@click.option("--k", default=5, type=int)
@click.option("--k-min", default=2, type=int)
@click.option("--delta-solver", default=0.3, type=float)
@click.option("--delta-archiver", default=0.7, type=float)
@click.option("--max-inner-steps", default=5, type=int)
@click.option("--max-outer-rounds", default=5, type=int)
def cmd_replay(transcript_path, task_path, store_path, out, embedding_dim,
               k, k_min, delta_solver, delta_archiver, max_inner_steps, max_outer_rounds):
    """Replay one task against a recorded transcript (golden-test driver)."""
    from maple.memory import RetrievalConfig
    from maple.orchestrator import EngineConfig

    task_records = ingest(task_path, DatasetFormat.NORMALIZED_JSONL)
    if not task_records:
        raise ConfigError(f"no tasks in {task_path}")
    if len(task_records) > 1:
        click.echo(f"note: {len(task_records)} tasks in file; replaying the first", err=True)
    task = tasks_from_records(task_records[:1])[0]

    backend = ReplayBackend(Transcript.load(transcript_path))
    embedder = HashEmbedder(dim=embedding_dim)
    clock = TickClock()
    if store_path:
        store = MemoryStore.load(store_path, embedder, clock=clock)
    else:
        store = MemoryStore(embedder, clock=clock)
    config = EngineConfig(
        retrieval=RetrievalConfig(
            k=k, k_min=k_min, delta_solver=delta_solver, delta_archiver=delta_archiver
        ),
        max_inner_steps=max_inner_steps,
        max_outer_rounds=max_outer_rounds,
    )
    mode = RunMode.MEMORY_BUILDING if task.ground_truth else RunMode.INFERENCE
    run = run_task(task, store, backend, config, mode, clock=TickClock())

    click.echo(f"final answer: {run.record.model_answer}")
    click.echo(f"terminal reason: {run.record.terminal_reason.value}")
    click.echo(
        f"outer rounds: {run.record.outer_rounds_used}  "
        f"solver steps: {run.record.inner_steps_used}"
    )
    if run.integration is not None:
        click.echo(
            f"note integrated: added={run.integration.added} "
            f"evolved={run.integration.evolved}"
        )
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "record.json", "w", encoding="utf-8") as fh:
            json.dump(run.record.to_dict(), fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")
        run.context.export(out_dir / "pool_log.jsonl")
        store.persist(out_dir / "store.jsonl")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="maple", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (MapleError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
