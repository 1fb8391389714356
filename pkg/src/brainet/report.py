"""Render a pipeline output directory into a human-readable report:
a markdown summary plus PNG figures (metric boxplots per model and the
degree-distribution comparison) written next to the delimited outputs.
"""

import csv
import json
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import DataError

FIGURE_DPI = 150
BOXPLOT_METRICS = ("micro_f1", "sensitivity", "specificity", "auc")


def _read_metrics(path):
    per_model = defaultdict(lambda: defaultdict(list))
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            for metric in BOXPLOT_METRICS:
                per_model[row["model"]][metric].append(float(row[metric]))
    return per_model


def _read_degree_distribution(path):
    per_group = defaultdict(dict)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            per_group[row["group"]][int(row["degree"])] = int(row["count"])
    return per_group


def plot_metric_boxplots(per_model, path) -> None:
    models = sorted(per_model)
    fig, axes = plt.subplots(1, len(BOXPLOT_METRICS), figsize=(3.2 * len(BOXPLOT_METRICS), 3.6), sharey=True)
    for ax, metric in zip(axes, BOXPLOT_METRICS):
        ax.boxplot([per_model[m][metric] for m in models], tick_labels=models)
        ax.set_title(metric)
        ax.set_ylim(-0.05, 1.05)
        ax.tick_params(axis="x", rotation=45)
    fig.suptitle("Bootstrapped classification metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)


def plot_degree_distribution(per_group, path) -> None:
    groups = [g for g in ("combined", "case", "control") if g in per_group]
    degrees = sorted({d for g in groups for d in per_group[g]})
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    width = 0.8 / max(1, len(groups))
    for k, group in enumerate(groups):
        counts = [per_group[group].get(d, 0) for d in degrees]
        ax.bar([d + (k - (len(groups) - 1) / 2) * width for d in degrees], counts, width=width, label=group)
    ax.set_xlabel("degree")
    ax.set_ylabel("biomarker count")
    ax.set_title("Degree distribution by network")
    if degrees:
        ax.set_xticks(degrees)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)


def _markdown_table(header, rows):
    out = ["| " + " | ".join(header) + " |", "| " + " | ".join("---" for _ in header) + " |"]
    for row in rows:
        out.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(out)


def render_report(run_dir, out_dir=None) -> str:
    """Build report.md and figures from a completed pipeline run directory."""
    out_dir = out_dir or run_dir
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise DataError(f"no manifest.json in {run_dir}; run the pipeline first")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    with open(os.path.join(run_dir, "summary.json"), "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    with open(os.path.join(run_dir, "pool.json"), "r", encoding="utf-8") as fh:
        pool = json.load(fh)
    with open(os.path.join(run_dir, "components.json"), "r", encoding="utf-8") as fh:
        components = json.load(fh)
    with open(os.path.join(run_dir, "diff.json"), "r", encoding="utf-8") as fh:
        diff = json.load(fh)

    per_model = _read_metrics(os.path.join(run_dir, "metrics.csv"))
    metrics_png = os.path.join(out_dir, "metrics_boxplot.png")
    plot_metric_boxplots(per_model, metrics_png)
    per_group = _read_degree_distribution(os.path.join(run_dir, "degree_distribution.csv"))
    degrees_png = os.path.join(out_dir, "degree_distribution.png")
    plot_degree_distribution(per_group, degrees_png)

    degree_rows = []
    with open(os.path.join(run_dir, "degree_table.csv"), "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            degree_rows.append(
                [row["name"], row["degree_case"], row["degree_control"], row["present_only_in_case"]]
            )

    lines = [
        "# Pipeline report",
        "",
        f"- config hash: `{manifest['config_sha256']}`",
        f"- base seed: {manifest['base_seed']}",
        f"- stages: {', '.join(manifest['stages'])}",
        f"- alpha: {manifest['config']['graph']['alpha']} ({manifest['config']['graph']['mode']} mode)",
        "",
        "## Classification metrics",
        "",
        f"![metric boxplots]({os.path.basename(metrics_png)})",
        "",
    ]
    header = ["model"] + [f"{m} (median [q1, q3])" for m in BOXPLOT_METRICS]
    rows = []
    for model in sorted(summary):
        cells = [model]
        for metric in BOXPLOT_METRICS:
            s = summary[model][metric]
            cells.append(f"{s['median']:.3f} [{s['q1']:.3f}, {s['q3']:.3f}]")
        rows.append(cells)
    lines += [_markdown_table(header, rows), ""]

    lines += [
        "## Biomarker pool",
        "",
        f"{len(pool['pool'])} biomarkers survived pooling"
        + (f"; excluded: {', '.join(pool['excluded'])}" if pool["excluded"] else ""),
        "",
        ", ".join(pool["pool"]),
        "",
        "## Network structure",
        "",
        f"![degree distribution]({os.path.basename(degrees_png)})",
        "",
    ]
    comp_rows = [
        [group, len(doc["sizes"]), ", ".join(str(s) for s in doc["sizes"]) or "-"]
        for group, doc in sorted(components.items())
    ]
    lines += [_markdown_table(["network", "components", "sizes"], comp_rows), ""]
    lines += [
        "## Case vs control",
        "",
        _markdown_table(["biomarker", "case degree", "control degree", "case only"], degree_rows),
        "",
        f"Edges lost moving case -> control: {len(diff['edges_lost'])}; gained: {len(diff['edges_gained'])}.",
        "",
    ]
    report_path = os.path.join(out_dir, "report.md")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    return report_path
