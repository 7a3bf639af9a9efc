"""Report writers: delimited outputs plus rendered figures.

Every writer is deterministic for identical inputs (fixed column order,
fixed float formatting) so reports can be byte-compared across runs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from maple.evaluation import ERROR_TYPE_ORDER, ErrorDistribution, EvalReport, MemoryStats

MEMORY_STATS_COLUMNS = [
    "Memory Count",
    "Memory Ratio (%)",
    "Evolution Count",
    "Evolution Ratio (%)",
    "# Evolved Memories",
    "Evolution Efficiency",
    "Med. Strengthen Distance",
    "Med. Update Distance",
]

_ERROR_LABELS = {
    "logical_reasoning": "Logical Reasoning",
    "counting_aggregation": "Counting & Aggregation",
    "format_temporal": "Format & Temporal",
    "incomplete_extraction": "Incomplete Extraction",
    "calculation_comparison": "Calculation & Comparison",
    "other": "Other",
}


def memory_stats_row(stats: MemoryStats) -> list[str]:
    return [
        str(stats.memory_count),
        f"{stats.memory_ratio * 100:.1f}",
        str(stats.evolution_count),
        f"{stats.evolution_ratio * 100:.1f}",
        str(stats.evolved_memories),
        f"{stats.evolution_efficiency:.2f}",
        f"{stats.median_strengthen_distance:.2f}",
        f"{stats.median_update_distance:.2f}",
    ]


def write_memory_stats_csv(stats: MemoryStats, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEMORY_STATS_COLUMNS)
        writer.writerow(memory_stats_row(stats))


def write_error_distribution_csv(dist: ErrorDistribution, path) -> None:
    proportions = dist.proportions()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["error_type", "count", "proportion"])
        for error_type in ERROR_TYPE_ORDER:
            writer.writerow(
                [error_type.value, dist.counts[error_type], f"{proportions[error_type]:.4f}"]
            )


def write_eval_csv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task_id", "predicted", "gold", "correct"])
        for row in report.rows:
            writer.writerow([row.task_id, row.predicted, row.gold, int(row.correct)])


def render_error_distribution_figure(dist: ErrorDistribution, path) -> None:
    """Pie of error-type proportions; empty stores get a placeholder note."""
    fig, ax = plt.subplots(figsize=(6, 6))
    nonzero = [(t, c) for t, c in dist.counts.items() if c > 0]
    if nonzero:
        labels = [_ERROR_LABELS[t.value] for t, _ in nonzero]
        sizes = [c for _, c in nonzero]
        ax.pie(sizes, labels=labels, autopct="%1.1f%%", startangle=90, counterclock=False)
        ax.set_title("Distribution of archived error types")
    else:
        ax.text(0.5, 0.5, "no errors archived", ha="center", va="center")
        ax.set_axis_off()
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def render_memory_stats_figure(stats: MemoryStats, path) -> None:
    """Two panels: raw counters, and ratio/efficiency values."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    counts = {
        "memories": stats.memory_count,
        "evolution ops": stats.evolution_count,
        "evolved": stats.evolved_memories,
    }
    left.bar(list(counts), list(counts.values()), color="#4878a8")
    left.set_title("Memory counters")
    left.set_ylabel("count")

    ratios = {
        "memory ratio": stats.memory_ratio,
        "evolution ratio": stats.evolution_ratio,
        "efficiency": stats.evolution_efficiency,
        "med. strengthen d": stats.median_strengthen_distance,
        "med. update d": stats.median_update_distance,
    }
    right.bar(list(ratios), list(ratios.values()), color="#a85448")
    right.set_title("Ratios and medians")
    right.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_stats_report(
    stats: MemoryStats, dist: ErrorDistribution, out_dir, with_figures: bool = True
) -> dict:
    """Emit the full stats report into a directory; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "memory_stats_csv": out / "memory_stats.csv",
        "error_distribution_csv": out / "error_distribution.csv",
    }
    write_memory_stats_csv(stats, paths["memory_stats_csv"])
    write_error_distribution_csv(dist, paths["error_distribution_csv"])
    if with_figures:
        paths["memory_stats_png"] = out / "memory_stats.png"
        paths["error_distribution_png"] = out / "error_distribution.png"
        render_memory_stats_figure(stats, paths["memory_stats_png"])
        render_error_distribution_figure(dist, paths["error_distribution_png"])
    return paths
