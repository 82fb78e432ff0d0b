"""Experiment orchestration: configuration, single runs with centralized and
random baselines, rank-based grid search, and deterministic CSV persistence.

Results land under ``<root>/<dataset>/<method>/<config-hash>/`` as long-format
CSV (dataset, method, setting, client, metric, value) plus per-client
assignment and per-cluster score files.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import ClientShard, DatasetManifest, fingerprint_matrix, read_dataset
from .kmeans import centralized_kmeans, fed_kmeans
from .lsh import centralized_lsh, fed_lsh
from .metrics import (
    ClusterAssignment, MetricsReport, evaluate, per_cluster_sf_icf,
    random_assignment, scaffold_kld,
)
from .partitioner import PartitionConfig, soft_split
from .pca import centralized_pca, fed_pca, fed_pca_kmeans, project
from .util import config_hash, derive_seed, format_value

FEDERATED_METHODS = ("fed_kmeans", "fed_pca_kmeans", "fed_lsh")
K_GRID = (5, 10, 20, 50, 100, 200, 500)
ROUNDS_GRID = (3, 5, 10)
P_GRID = (5, 10, 20, 50)
NHE_GRID = (4, 8, 16, 32)
CLIENTS_GRID = (5, 10)

# best configurations from the reference benchmarking, per client count
OPTIMAL_HYPERPARAMETERS = {
    ("fed_kmeans", 5): {"k": 5, "rounds": 3},
    ("fed_kmeans", 10): {"k": 500, "rounds": 10},
    ("fed_pca_kmeans", 5): {"p": 5, "k": 5, "rounds": 3},
    ("fed_pca_kmeans", 10): {"p": 5, "k": 5, "rounds": 5},
    ("fed_lsh", 5): {"n_he": 32},
    ("fed_lsh", 10): {"n_he": 32},
}

RANKING_METRICS = ("silhouette_euclidean", "davies_bouldin", "calinski_harabasz", "sf_icf")

CENTRALIZED_NAME = {
    "fed_kmeans": "centralized_kmeans",
    "fed_pca_kmeans": "centralized_pca_kmeans",
    "fed_lsh": "centralized_lsh",
    "random": "random",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str  # path to a canonical TSV, or a directory of client files
    method: str
    n_clients: int = 5
    k: int | None = None
    rounds: int | None = None
    p: int | None = None
    n_he: int | None = None
    seed: int = 0
    primary_fraction: float = 0.9
    dirichlet_alpha: float = 50.0
    unsafe_grid: bool = False

    def resolved(self) -> "ExperimentConfig":
        """Fill unset hyperparameters with the reference optima for this client count."""
        known = OPTIMAL_HYPERPARAMETERS.get(
            (self.method, self.n_clients),
            OPTIMAL_HYPERPARAMETERS.get((self.method, 5), {"k": 5, "rounds": 3}),
        )
        updates = {name: value for name, value in known.items() if getattr(self, name) is None}
        return replace(self, **updates) if updates else self

    def validate(self) -> None:
        if self.method not in FEDERATED_METHODS + ("random",):
            raise ConfigError(f"unknown method {self.method!r}")
        cfg = self.resolved()
        if cfg.unsafe_grid:
            return
        checks = []
        if cfg.method in ("fed_kmeans", "fed_pca_kmeans"):
            checks += [("k", cfg.k, K_GRID), ("rounds", cfg.rounds, ROUNDS_GRID)]
        if cfg.method == "fed_pca_kmeans":
            checks.append(("p", cfg.p, P_GRID))
        if cfg.method == "fed_lsh":
            checks.append(("n_he", cfg.n_he, NHE_GRID))
        checks.append(("n_clients", cfg.n_clients, CLIENTS_GRID))
        for name, value, grid in checks:
            if value not in grid:
                raise ConfigError(f"{name}={value} outside the benchmark grid {grid} (use unsafe_grid to override)")

    def setting(self) -> str:
        cfg = self.resolved()
        parts = []
        for name in ("k", "rounds", "p", "n_he"):
            value = getattr(cfg, name)
            if value is not None and _relevant(cfg.method, name):
                parts.append(f"{name}={value}")
        parts.append(f"clients={cfg.n_clients}")
        return ",".join(parts)

    def config_id(self) -> str:
        cfg = self.resolved()
        keys = ("method", "n_clients", "k", "rounds", "p", "n_he", "seed",
                "primary_fraction", "dirichlet_alpha")
        return " ".join(f"{k}={getattr(cfg, k)}" for k in keys)

    def hash(self) -> str:
        return config_hash(self.config_id())


def _relevant(method: str, name: str) -> bool:
    if method in ("fed_kmeans", "random"):
        return name in ("k", "rounds")
    if method == "fed_pca_kmeans":
        return name in ("k", "rounds", "p")
    return name == "n_he"


CONFIG_KEYS = {
    "dataset": str, "method": str, "n_clients": int, "k": int, "rounds": int,
    "p": int, "n_he": int, "seed": int, "primary_fraction": float,
    "dirichlet_alpha": float, "unsafe_grid": lambda v: v.lower() in ("1", "true", "yes"),
}


def read_config_file(path) -> ExperimentConfig:
    """Parse the flat key-value experiment config format (one `key = value` per line)."""
    values: dict[str, object] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](raw)
        except ValueError:
            raise ConfigError(f"{path}:{line_no}: bad value {raw!r} for {key!r}") from None
    if "dataset" not in values or "method" not in values:
        raise ConfigError(f"{path}: config must set at least 'dataset' and 'method'")
    return ExperimentConfig(**values)  # type: ignore[arg-type]


def write_config_file(cfg: ExperimentConfig, path) -> None:
    lines = []
    for key in CONFIG_KEYS:
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"{key} = {format_value(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_shards(cfg: ExperimentConfig) -> tuple[str, DatasetManifest, list[ClientShard]]:
    """Load pre-partitioned client files from a directory, or partition a TSV."""
    path = Path(cfg.dataset)
    if path.is_dir():
        files = sorted(path.glob("*.client*.tsv"))
        if not files:
            raise ConfigError(f"{path}: no *.client<k>.tsv files found")
        shards = []
        manifest = None
        name = None
        for f in files:
            m, records = read_dataset(f)
            stem, _, suffix = m.name.rpartition(".client")
            try:
                client_id = int(suffix)
            except ValueError:
                raise ConfigError(f"{f}: cannot parse client id from filename") from None
            if manifest is None:
                manifest, name = m, stem
            elif m.feature_groups != manifest.feature_groups or m.fingerprint_bits != manifest.fingerprint_bits:
                raise ConfigError(f"{f}: shard schema differs from {files[0]}")
            shards.append(ClientShard(client_id=client_id, records=tuple(records)))
        shards.sort(key=lambda s: s.client_id)
        if [s.client_id for s in shards] != list(range(len(shards))):
            raise ConfigError(f"{path}: client files must cover ids 0..{len(shards) - 1}")
        if len(shards) != cfg.n_clients:
            raise ConfigError(f"{path}: found {len(shards)} shards but n_clients={cfg.n_clients}")
        return name, manifest, shards
    manifest, records = read_dataset(path)
    part = PartitionConfig(
        n_clients=cfg.n_clients,
        primary_fraction=cfg.primary_fraction,
        dirichlet_alpha=cfg.dirichlet_alpha,
        seed=cfg.seed,
    )
    return manifest.name, manifest, soft_split(records, part)


@dataclass
class VariantResult:
    method: str
    assignments: list[ClusterAssignment]     # one per client
    points: list[np.ndarray]                 # evaluation feature space per client
    reports: list[MetricsReport] = field(default_factory=list)


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    dataset_name: str
    shards: list[ClientShard]
    variants: list[VariantResult]            # federated, centralized, random
    rows: list[dict] = field(default_factory=list)
    percluster_rows: list[dict] = field(default_factory=list)
    out_dir: Path | None = None

    def variant(self, method: str) -> VariantResult:
        for v in self.variants:
            if v.method == method:
                return v
        raise KeyError(method)


def _run_federated(cfg: ExperimentConfig, shards: list[ClientShard]):
    raw_points = [fingerprint_matrix(s.records).astype(np.float64) for s in shards]
    if cfg.method == "fed_kmeans":
        _, assignments = fed_kmeans(shards, cfg.k, cfg.rounds, cfg.seed)
        return assignments, raw_points
    if cfg.method == "fed_pca_kmeans":
        _, assignments, proj = fed_pca_kmeans(shards, cfg.p, cfg.k, cfg.rounds, cfg.seed)
        return assignments, [project(s, proj) for s in shards]
    if cfg.method == "fed_lsh":
        _, assignments = fed_lsh(shards, cfg.n_he, seed=cfg.seed)
        return assignments, raw_points
    if cfg.method == "random":
        assignments = [
            random_assignment(len(s), cfg.k, derive_seed(cfg.seed, "random", s.client_id))
            for s in shards
        ]
        return assignments, raw_points
    raise ConfigError(f"unknown method {cfg.method!r}")


def _run_centralized(cfg: ExperimentConfig, shards: list[ClientShard]):
    """Pooled-data counterpart, evaluated per client by slicing the pooled labels."""
    pooled_records = [rec for s in shards for rec in s.records]
    pooled_fps = fingerprint_matrix(pooled_records).astype(np.float64)
    slices = np.cumsum([0] + [len(s) for s in shards])
    raw_points = [pooled_fps[slices[i]:slices[i + 1]] for i in range(len(shards))]

    if cfg.method == "fed_kmeans":
        _, assignment = centralized_kmeans(pooled_fps, cfg.k, cfg.rounds, cfg.seed)
        points = raw_points
    elif cfg.method == "fed_pca_kmeans":
        proj = centralized_pca(pooled_fps, cfg.p)
        projected = project(pooled_fps, proj)
        _, assignment = centralized_kmeans(projected, cfg.k, cfg.rounds, cfg.seed,
                                           method="centralized_pca_kmeans")
        points = [projected[slices[i]:slices[i + 1]] for i in range(len(shards))]
    elif cfg.method == "fed_lsh":
        assignment = centralized_lsh(pooled_records, cfg.n_he)
        points = raw_points
    else:
        raise ConfigError(f"unknown method {cfg.method!r}")

    name = CENTRALIZED_NAME[cfg.method]
    assignments = [
        ClusterAssignment(assignment.labels[slices[i]:slices[i + 1]], name, dict(assignment.provenance))
        for i in range(len(shards))
    ]
    return assignments, points


def run_experiment(cfg: ExperimentConfig, results_root=None) -> ExperimentOutcome:
    """Run one experiment: federated method, centralized counterpart, random baseline.

    Every variant is evaluated per client with the full metric set; the random
    baseline matches the federated result's observed cluster count per client.
    Fully deterministic in cfg.seed.
    """
    cfg.validate()
    cfg = cfg.resolved()
    dataset_name, manifest, shards = load_shards(cfg)
    kinds = dict(manifest.feature_groups)

    fed_assignments, fed_points = _run_federated(cfg, shards)
    if cfg.method == "random":
        # all three baselines coincide: random has no federated/centralized split
        cen_assignments, cen_points = fed_assignments, fed_points
        rnd_assignments = fed_assignments
    else:
        cen_assignments, cen_points = _run_centralized(cfg, shards)
        rnd_assignments = [
            random_assignment(
                len(shard),
                max(1, fed_assignments[i].n_clusters),
                derive_seed(cfg.seed, "random_baseline", shard.client_id),
            )
            for i, shard in enumerate(shards)
        ]

    variants = [
        VariantResult(cfg.method, fed_assignments, fed_points),
        VariantResult(CENTRALIZED_NAME[cfg.method], cen_assignments, cen_points),
        VariantResult("random", rnd_assignments, fed_points),
    ]
    for variant in variants:
        variant.reports = [
            evaluate(shard, assignment, points=points, feature_kinds=kinds)
            for shard, assignment, points in zip(shards, variant.assignments, variant.points)
        ]

    outcome = ExperimentOutcome(cfg, dataset_name, shards, variants)
    outcome.rows = _metric_rows(outcome)
    outcome.percluster_rows = _percluster_rows(outcome)
    if results_root is not None:
        _persist(outcome, Path(results_root))
    return outcome


def compare_federated_centralized(cfg: ExperimentConfig, results_root=None) -> ExperimentOutcome:
    """Paired federated / centralized / random report for one configuration."""
    return run_experiment(cfg, results_root)


def _report_values(report: MetricsReport) -> dict[str, float | int | None]:
    # degenerate metrics are already None (flagged-missing); inf sentinels stay
    # inf in the per-client rows but never enter means or ranks
    values: dict[str, float | int | None] = dict(report.scalar_metrics())
    for group, score in report.per_feature_group_ficf.items():
        values[f"ficf_{group}"] = score
    stats = report.cluster_stats
    values["n_clusters"] = stats.n_clusters
    values["min_size"] = stats.min_size
    values["max_size"] = stats.max_size
    values["mean_size"] = stats.mean_size
    return values


def _metric_rows(outcome: ExperimentOutcome) -> list[dict]:
    rows = []
    setting = outcome.config.setting()
    for variant in outcome.variants:
        per_metric: dict[str, list[float]] = {}
        for client_index, report in enumerate(variant.reports):
            client_id = outcome.shards[client_index].client_id
            for metric, value in _report_values(report).items():
                rows.append({
                    "dataset": outcome.dataset_name,
                    "method": variant.method,
                    "setting": setting,
                    "client": str(client_id),
                    "metric": metric,
                    "value": value,
                })
                if value is not None and math.isfinite(value):
                    per_metric.setdefault(metric, []).append(value)
                else:
                    per_metric.setdefault(metric, [])
        for metric, values in per_metric.items():
            rows.append({
                "dataset": outcome.dataset_name,
                "method": variant.method,
                "setting": setting,
                "client": "mean",
                "metric": metric,
                "value": float(np.mean(values)) if values else None,
            })
    return rows


def _percluster_rows(outcome: ExperimentOutcome) -> list[dict]:
    """Per-cluster SF-ICF and scaffold KLD for the federated variant."""
    rows = []
    cfg = outcome.config
    variant = outcome.variants[0]
    for shard, assignment in zip(outcome.shards, variant.assignments):
        scaffolds = [rec.scaffold for rec in shard.records]
        labels = assignment.labels
        scores = per_cluster_sf_icf(scaffolds, labels)
        klds = scaffold_kld(scaffolds, labels)
        sizes = np.bincount(np.unique(labels, return_inverse=True)[1])
        for cluster_id in range(len(scores)):
            rows.append({
                "dataset": outcome.dataset_name,
                "method": variant.method,
                "setting": cfg.setting(),
                "client": str(shard.client_id),
                "cluster": cluster_id,
                "size": int(sizes[cluster_id]),
                "sf_icf": scores[cluster_id],
                "kld": klds[cluster_id],
            })
    return rows


def write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[dict]) -> None:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: format_value(row.get(k)) for k in fieldnames})
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buffer.getvalue(), encoding="utf-8")


METRIC_FIELDS = ("dataset", "method", "setting", "client", "metric", "value")
PERCLUSTER_FIELDS = ("dataset", "method", "setting", "client", "cluster", "size", "sf_icf", "kld")


def _persist(outcome: ExperimentOutcome, root: Path) -> None:
    out_dir = root / outcome.dataset_name / outcome.config.method / outcome.config.hash()
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config_file(outcome.config, out_dir / "config.txt")

    for index, shard in enumerate(outcome.shards):
        cid = shard.client_id
        client_rows = [r for r in outcome.rows if r["client"] == str(cid)]
        write_csv(out_dir / f"client{cid}.csv", METRIC_FIELDS, client_rows)

        assignment_rows = []
        for rec_index, rec in enumerate(shard.records):
            assignment_rows.append({
                "mol_id": rec.mol_id,
                "federated": int(outcome.variants[0].assignments[index].labels[rec_index]),
                "centralized": int(outcome.variants[1].assignments[index].labels[rec_index]),
                "random": int(outcome.variants[2].assignments[index].labels[rec_index]),
            })
        write_csv(out_dir / f"assignments.client{cid}.csv",
                  ("mol_id", "federated", "centralized", "random"), assignment_rows)

        pc_rows = [r for r in outcome.percluster_rows if r["client"] == str(cid)]
        write_csv(out_dir / f"perclusters.client{cid}.csv", PERCLUSTER_FIELDS, pc_rows)

    write_csv(out_dir / "aggregate.csv", METRIC_FIELDS,
              [r for r in outcome.rows if r["client"] == "mean"])
    outcome.out_dir = out_dir


@dataclass
class RankEntry:
    config_id: str
    dataset: str
    client: str
    metric: str
    value: float | None
    rank: float


@dataclass
class RankTable:
    entries: list[RankEntry]
    mean_ranks: dict[str, float]
    best_per_method: dict[str, str]  # method -> config_id


def _rank_slice(values: list[float | None], higher_better: bool) -> list[float]:
    """Ranks 1..n, direction-normalized; ties share the average rank and
    missing/non-finite values take the worst rank."""
    n = len(values)
    usable = [(i, v) for i, v in enumerate(values) if v is not None and math.isfinite(v)]
    ranks = [float(n)] * n
    ordered = sorted(usable, key=lambda iv: -iv[1] if higher_better else iv[1])
    pos = 0
    while pos < len(ordered):
        end = pos
        while end + 1 < len(ordered) and ordered[end + 1][1] == ordered[pos][1]:
            end += 1
        avg = (pos + end) / 2 + 1.0
        for j in range(pos, end + 1):
            ranks[ordered[j][0]] = avg
        pos = end + 1
    return ranks


def grid_search(
    configs: Sequence[ExperimentConfig],
    results_root=None,
    ranking_metrics: Sequence[str] = RANKING_METRICS,
) -> RankTable:
    """Rank configurations per (dataset, client, metric) and aggregate.

    Direction-aware (Davies-Bouldin inverted), equal weights across metrics,
    clients and datasets; flagged-missing values receive the worst rank so a
    degenerate configuration cannot win by absence.
    """
    if not configs:
        raise ConfigError("empty grid")
    outcomes = [run_experiment(cfg, results_root) for cfg in configs]
    ids = [cfg.config_id() for cfg in configs]
    pairs = [(cid, outcome.dataset_name) for cid, outcome in zip(ids, outcomes)]
    if len(set(pairs)) != len(pairs):
        raise ConfigError("duplicate (configuration, dataset) pairs in grid")

    # a config id names one hyperparameter setting; values merge its datasets
    representative: dict[str, ExperimentConfig] = {}
    for cid, cfg in zip(ids, configs):
        representative.setdefault(cid, cfg)
    values: dict[str, dict[tuple[str, str, str], float | None]] = {cid: {} for cid in representative}
    cluster_counts: dict[str, list[float]] = {cid: [] for cid in representative}
    for cid, outcome in zip(ids, outcomes):
        federated = outcome.variants[0]
        cluster_counts[cid].extend(a.n_clusters for a in federated.assignments)
        for client_index, report in enumerate(federated.reports):
            client = str(outcome.shards[client_index].client_id)
            for metric, value in report.scalar_metrics().items():
                if metric in ranking_metrics:
                    values[cid][(outcome.dataset_name, client, metric)] = value

    mean_clusters = {cid: float(np.mean(counts)) for cid, counts in cluster_counts.items()}
    return compute_rank_table(values, representative, mean_clusters)


def compute_rank_table(
    values: dict[str, dict[tuple[str, str, str], float | None]],
    configs: dict[str, ExperimentConfig],
    mean_clusters: dict[str, float],
) -> RankTable:
    """Rank aggregation over a value table keyed by (dataset, client, metric)."""
    from .metrics import METRIC_DIRECTIONS

    ids = list(values)
    slices = sorted({key for by_key in values.values() for key in by_key})
    entries: list[RankEntry] = []
    totals: dict[str, list[float]] = {cid: [] for cid in ids}
    for key in slices:
        dataset, client, metric = key
        slice_values = [values[cid].get(key) for cid in ids]
        ranks = _rank_slice(slice_values, METRIC_DIRECTIONS[metric] > 0)
        for cid, value, rank in zip(ids, slice_values, ranks):
            entries.append(RankEntry(cid, dataset, client, metric, value, rank))
            totals[cid].append(rank)

    mean_ranks = {cid: float(np.mean(r)) for cid, r in totals.items()}

    def tie_key(cid: str):
        r = configs[cid].resolved()
        return (
            mean_ranks[cid],
            mean_clusters.get(cid, 0.0),
            r.k or 0, r.p or 0, r.n_he or 0,
            cid,
        )

    best_per_method: dict[str, str] = {}
    for cid in sorted(ids, key=tie_key):
        best_per_method.setdefault(configs[cid].method, cid)
    return RankTable(entries=entries, mean_ranks=mean_ranks, best_per_method=best_per_method)


def default_grid(dataset: str, method: str, n_clients: int, seed: int) -> list[ExperimentConfig]:
    """The benchmark hyperparameter grid for one method."""
    base = ExperimentConfig(dataset=dataset, method=method, n_clients=n_clients, seed=seed)
    if method == "fed_kmeans":
        return [replace(base, k=k, rounds=r) for k in K_GRID for r in ROUNDS_GRID]
    if method == "fed_pca_kmeans":
        return [replace(base, p=p, k=k, rounds=r) for p in P_GRID for k in K_GRID for r in ROUNDS_GRID]
    if method == "fed_lsh":
        return [replace(base, n_he=n) for n in NHE_GRID]
    raise ConfigError(f"no grid for method {method!r}")


def export_projection(shards: Sequence[ClientShard], p: int, out_path, seed: int = 0) -> None:
    """Write per-client PCA coordinates (one row per molecule) for qualitative plots."""
    proj = fed_pca(shards, p, seed=seed)
    rows = []
    for shard in shards:
        coords = project(shard, proj)
        for rec, row in zip(shard.records, coords):
            entry = {"client": shard.client_id, "mol_id": rec.mol_id, "scaffold": rec.scaffold}
            for i in range(p):
                entry[f"pc{i + 1}"] = float(row[i])
            rows.append(entry)
    fields = ["client", "mol_id", "scaffold"] + [f"pc{i + 1}" for i in range(p)]
    write_csv(Path(out_path), fields, rows)
