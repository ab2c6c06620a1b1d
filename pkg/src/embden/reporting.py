"""Report rendering: delimited tables plus matplotlib figures on disk.

Training runs emit loss-trace CSVs with a loss-curve PNG next to them;
evaluation runs emit the JSON report, a per-pair CSV, and per-metric
histogram figures in the same directory.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import MetricReport


def save_traces_csv(traces: dict, path) -> Path:
    """Write {name: [(step, value), ...]} traces as long-format CSV."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["trace", "step", "value"])
        for name in sorted(traces):
            for step, value in traces[name]:
                writer.writerow([name, step, f"{value:.8g}"])
    return path


def save_loss_figure(traces: dict, path, title="training loss") -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    for name in sorted(traces):
        points = traces[name]
        if not points:
            continue
        steps, values = zip(*points)
        ax.plot(steps, values, label=name, linewidth=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_title(title)
    if any(traces.values()):
        ax.legend(frameon=False, fontsize=8)
        finite_positive = all(v > 0 for pts in traces.values() for _, v in pts)
        if finite_positive:
            ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_metric_report(report: MetricReport, json_path) -> list[Path]:
    """Write report JSON plus sibling CSV and per-metric histograms."""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    written = [json_path]

    csv_path = json_path.with_suffix(".csv")
    metric_keys = sorted({k for p in report.pairs for k in p if k != "id"})
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id"] + metric_keys)
        for p in report.pairs:
            writer.writerow([p["id"]] + [f"{p[k]:.6g}" if k in p else "" for k in metric_keys])
    written.append(csv_path)

    for key in metric_keys:
        values = [p[key] for p in report.pairs if key in p]
        if not values:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(values, bins=min(20, max(5, len(values))), color="#4878d0",
                edgecolor="white")
        ax.axvline(report.aggregates[key], color="#d65f5f", linewidth=1.5,
                   label=f"mean {report.aggregates[key]:.3g}")
        ax.set_xlabel(key)
        ax.set_ylabel("pairs")
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig_path = json_path.with_name(f"{json_path.stem}_{key}.png")
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        written.append(fig_path)
    return written
