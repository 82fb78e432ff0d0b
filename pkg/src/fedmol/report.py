"""Report assembly: collect persisted experiment results into two long-format
CSVs (per-metric benchmark rows and per-cluster SF-ICF vs KLD rows) and render
the companion figures next to them.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import METRIC_FIELDS, PERCLUSTER_FIELDS, write_csv

BENCHMARK_METRICS = (
    "silhouette_euclidean", "davies_bouldin", "calinski_harabasz",
    "silhouette_tanimoto", "sf_icf",
)


def _read_rows(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def collect_results(results_root) -> tuple[list[dict], list[dict]]:
    """Gather metric and per-cluster rows from every run directory under the root."""
    root = Path(results_root)
    metric_rows: list[dict] = []
    percluster_rows: list[dict] = []
    for config_dir in sorted(root.glob("*/*/*")):
        if not config_dir.is_dir():
            continue
        for f in sorted(config_dir.glob("client*.csv")):
            metric_rows.extend(_read_rows(f))
        aggregate = config_dir / "aggregate.csv"
        if aggregate.exists():
            metric_rows.extend(_read_rows(aggregate))
        for f in sorted(config_dir.glob("perclusters.client*.csv")):
            percluster_rows.extend(_read_rows(f))
    return metric_rows, percluster_rows


def _parse(value: str) -> float | None:
    if value in ("", "NA"):
        return None
    return float(value)


def render_metrics_figure(metric_rows: list[dict], out_path: Path) -> None:
    """Per-metric boxplots of per-client values grouped by method (means as diamonds)."""
    rows = [r for r in metric_rows if r["client"] != "mean" and r["metric"] in BENCHMARK_METRICS]
    methods = sorted({r["method"] for r in rows})
    fig, axes = plt.subplots(1, len(BENCHMARK_METRICS), figsize=(4 * len(BENCHMARK_METRICS), 4))
    if len(BENCHMARK_METRICS) == 1:
        axes = [axes]
    for ax, metric in zip(axes, BENCHMARK_METRICS):
        data = []
        for method in methods:
            values = [
                _parse(r["value"]) for r in rows
                if r["metric"] == metric and r["method"] == method
            ]
            data.append([v for v in values if v is not None and np.isfinite(v)])
        ax.boxplot(
            [d if d else [np.nan] for d in data],
            tick_labels=methods,
            showmeans=True,
            meanprops={"marker": "D", "markerfacecolor": "white", "markeredgecolor": "black"},
        )
        ax.set_title(metric)
        ax.tick_params(axis="x", rotation=60)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def render_sficf_vs_kld_figure(percluster_rows: list[dict], out_path: Path) -> None:
    """Per-cluster SF-ICF against scaffold KLD; each point is a cluster, color is size."""
    kld = np.array([_parse(r["kld"]) for r in percluster_rows], dtype=np.float64)
    sficf = np.array([_parse(r["sf_icf"]) for r in percluster_rows], dtype=np.float64)
    sizes = np.array([_parse(r["size"]) for r in percluster_rows], dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 5))
    if len(kld):
        scatter = ax.scatter(kld, sficf, c=sizes, cmap="viridis", s=18, alpha=0.8)
        fig.colorbar(scatter, ax=ax, label="cluster size")
    ax.set_xlabel("scaffold KL divergence")
    ax.set_ylabel("per-cluster SF-ICF")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def assemble_report(results_root, out_dir) -> dict[str, Path]:
    """Write metrics_long.csv, sficf_vs_kld.csv and the two figures into out_dir."""
    metric_rows, percluster_rows = collect_results(results_root)
    if not metric_rows:
        raise FileNotFoundError(f"no result CSVs found under {results_root}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out / "metrics_long.csv",
        "perclusters": out / "sficf_vs_kld.csv",
        "metrics_figure": out / "fig_metrics.png",
        "perclusters_figure": out / "fig_sficf_vs_kld.png",
    }
    write_csv(paths["metrics"], METRIC_FIELDS, metric_rows)
    write_csv(paths["perclusters"], PERCLUSTER_FIELDS, percluster_rows)
    render_metrics_figure(metric_rows, paths["metrics_figure"])
    render_sficf_vs_kld_figure(percluster_rows, paths["perclusters_figure"])
    return paths
