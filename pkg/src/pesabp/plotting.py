"""Report rendering: ROC / timing figures plus a tab-delimited metric table."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import read_roc_csv  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}
COLORS = {"quality": "#2F3EEA", "detection": "#E83F48", "chance": "#9a9a9a"}


def figsize(scale=1.0, ratio=None):
    width = 5.0 * scale
    ratio = ratio or (math.sqrt(5.0) - 1.0) / 2.0
    return width, width * ratio


def plot_roc(results_dir, out_path):
    results_dir = Path(results_dir)
    summary = json.loads((results_dir / "summary.json").read_text())
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.8, 1.0))
        for task in ("quality", "detection"):
            pts = read_roc_csv(results_dir / f"roc_{task}.csv")
            ax.plot([p.fpr for p in pts], [p.tpr for p in pts], color=COLORS[task],
                    label=f"{task} (AUC {summary[task]['auc']:.3f})")
        ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color=COLORS["chance"])
        ax.set_xlabel("False-positive rate")
        ax.set_ylabel("True-positive rate")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.legend(loc="lower right", frameon=False)
        fig.tight_layout()
        fig.savefig(out_path, metadata={"Software": None})
        plt.close(fig)


def plot_timing(summary, out_path):
    timing = summary.get("timing_ms")
    if not timing:
        return False
    tasks = ["quality", "detection"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.7))
        means = [timing[t]["mean_ms"] for t in tasks]
        p95 = [timing[t]["p95_ms"] for t in tasks]
        ax.bar(tasks, means, color=[COLORS[t] for t in tasks], width=0.5, label="mean")
        ax.scatter(tasks, p95, marker="_", s=300, color="k", label="p95", zorder=3)
        ax.set_ylabel("ms per sample")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(out_path, metadata={"Software": None})
        plt.close(fig)
    return True


def _fmt(v):
    if v is None:
        return "undefined"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_table(summary, out_path):
    rows = []
    for task in ("quality", "detection"):
        for key in sorted(summary[task]):
            rows.append((task, key, _fmt(summary[task][key])))
    for task, t in (summary.get("timing_ms") or {}).items():
        rows.append(("timing", f"{task}_mean_ms", _fmt(t["mean_ms"])))
        rows.append(("timing", f"{task}_p95_ms", _fmt(t["p95_ms"])))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["task", "metric", "value"])
        w.writerows(rows)
    return rows


def render_report(results_dir, out_dir=None) -> list[Path]:
    """Write report.tsv, roc.png and (when timed) timing.png; return the paths."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir or results_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = json.loads((results_dir / "summary.json").read_text())
    written = [out_dir / "report.tsv", out_dir / "roc.png"]
    write_table(summary, written[0])
    plot_roc(results_dir, written[1])
    if plot_timing(summary, out_dir / "timing.png"):
        written.append(out_dir / "timing.png")
    return written
