"""Evaluation report rendering: JSON + CSV tables plus matplotlib figures.

`export-report` writes everything into one directory:

    report.json            machine-readable evaluation report
    report.csv             per-method metric table (comma-delimited)
    consensus.csv          consensus entries
    figures/*.png          metric bars, flag counts, agreement histogram
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import ConsensusEntry, EvaluationReport

_REPORT_CSV_COLUMNS = (
    "method_id", "true_positives", "false_positives", "flagged_athletes",
    "precision", "recall", "f1", "p_at_200", "wall_time_ms",
)


def write_report_csv(report: EvaluationReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_REPORT_CSV_COLUMNS)
        for method_id in sorted(report.per_method):
            m = report.per_method[method_id]
            writer.writerow([
                m.method_id, m.true_positives, m.false_positives, m.flagged_athletes,
                f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}",
                f"{m.precision_at_k.get(200, 0.0):.6f}", f"{m.wall_time_ms:.1f}",
            ])


def write_consensus_csv(entries: Sequence[ConsensusEntry], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["athlete_id", "method_count", "methods_flagging", "is_sanctioned", "best_normalized_rank"])
        for e in entries:
            writer.writerow([
                e.athlete_id, e.method_count, ";".join(e.methods_flagging),
                int(e.is_sanctioned), f"{e.best_normalized_rank:.4f}",
            ])


def _metric_figure(report: EvaluationReport, path: Path) -> None:
    methods = sorted(report.per_method)
    x = range(len(methods))
    width = 0.27
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for offset, (label, getter) in enumerate((
        ("precision", lambda m: m.precision),
        ("recall", lambda m: m.recall),
        ("F1", lambda m: m.f1),
    )):
        values = [getter(report.per_method[m]) for m in methods]
        ax.bar([i + (offset - 1) * width for i in x], values, width, label=label)
    ax.set_xticks(list(x))
    ax.set_xticklabels(methods, rotation=30, ha="right")
    ax.set_ylabel("athlete-level metric")
    ax.set_title(f"Detection metrics ({report.sanctioned_count} sanctioned athletes)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _flag_count_figure(report: EvaluationReport, path: Path) -> None:
    methods = sorted(report.per_method)
    counts = [report.per_method[m].flagged_athletes for m in methods]
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar(methods, counts, color="#4878d0")
    ax.set_ylabel("flagged athletes")
    ax.set_title("Flag volume per method")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _agreement_figure(entries: Sequence[ConsensusEntry], path: Path) -> None:
    counts: dict[int, int] = {}
    for e in entries:
        counts[e.method_count] = counts.get(e.method_count, 0) + 1
    fig, ax = plt.subplots(figsize=(6, 4))
    if counts:
        ks = sorted(counts)
        ax.bar([str(k) for k in ks], [counts[k] for k in ks], color="#d65f5f")
    ax.set_xlabel("methods agreeing")
    ax.set_ylabel("athletes")
    ax.set_title("Cross-method agreement")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(
    report: EvaluationReport,
    consensus_entries: Sequence[ConsensusEntry],
    out_dir: str | Path,
) -> dict[str, Path]:
    """Write the full report bundle; returns the paths written."""
    out = Path(out_dir)
    figures = out / "figures"
    figures.mkdir(parents=True, exist_ok=True)

    paths = {
        "report_json": out / "report.json",
        "report_csv": out / "report.csv",
        "consensus_csv": out / "consensus.csv",
        "metrics_png": figures / "method_metrics.png",
        "flags_png": figures / "flag_counts.png",
        "agreement_png": figures / "consensus_agreement.png",
    }

    payload = report.to_payload()
    payload["consensus"] = [e.to_payload() for e in consensus_entries]
    with open(paths["report_json"], "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")

    write_report_csv(report, paths["report_csv"])
    write_consensus_csv(consensus_entries, paths["consensus_csv"])
    _metric_figure(report, paths["metrics_png"])
    _flag_count_figure(report, paths["flags_png"])
    _agreement_figure(consensus_entries, paths["agreement_png"])
    return paths
