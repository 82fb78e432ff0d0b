"""Command-line interface for the full pipeline.

Subcommands: generate, partition, run, grid, explain, project, report.
Every subcommand is deterministic in --seed and its inputs; errors produce a
single machine-parsable line on stderr and a nonzero exit code.  The default
results root is ./results, overridable by $FEDMOL_RESULTS_DIR or --results-dir.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import experiments as xp
from .explain import (
    RandomForestConfig, feature_sharing_statistics, overclustering_flag,
    rf_feature_group_importance,
)
from .metrics import ClusterAssignment, cluster_statistics, x_f_icf
from .partitioner import PartitionConfig, soft_split
from .report import assemble_report


def _results_root(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("FEDMOL_RESULTS_DIR", "results"))


def _add_run_like_flags(sub: argparse.ArgumentParser) -> None:
    src = sub.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="centralized dataset TSV (will be partitioned)")
    src.add_argument("--shards-dir", help="directory of pre-partitioned client TSVs")
    sub.add_argument("--clients", type=int, default=None, help="number of FL clients (default 5, or shard count)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--primary-fraction", type=float, default=0.9)
    sub.add_argument("--alpha", type=float, default=50.0, help="Dirichlet concentration for the soft split")
    sub.add_argument("--results-dir", default=None)
    sub.add_argument("--unsafe-grid", action="store_true", help="allow hyperparameters outside the benchmark grids")


def _dataset_arg(args) -> tuple[str, int]:
    if args.shards_dir:
        shard_files = sorted(Path(args.shards_dir).glob("*.client*.tsv"))
        n_clients = args.clients if args.clients is not None else len(shard_files)
        return args.shards_dir, n_clients
    return args.input, args.clients if args.clients is not None else 5


def _build_config(args) -> xp.ExperimentConfig:
    if getattr(args, "config", None):
        return xp.read_config_file(args.config)
    dataset, n_clients = _dataset_arg(args)
    return xp.ExperimentConfig(
        dataset=dataset,
        method=args.method.replace("-", "_"),
        n_clients=n_clients,
        k=args.k,
        rounds=args.rounds,
        p=args.p,
        n_he=args.n_he,
        seed=args.seed,
        primary_fraction=args.primary_fraction,
        dirichlet_alpha=args.alpha,
        unsafe_grid=args.unsafe_grid,
    )


def cmd_generate(args) -> int:
    spec = ds.SyntheticSpec(
        n_scaffolds=args.scaffolds,
        molecules_per_scaffold=args.per_scaffold,
        bits_per_scaffold_core=args.core_bits,
        noise_bits=args.noise_bits,
        fingerprint_bits=args.bits,
        seed=args.seed,
        name=args.name or ds.dataset_name(Path(args.output)),
    )
    manifest, records = ds.generate_synthetic(spec)
    ds.write_dataset(manifest, records, args.output)
    print(f"wrote {manifest.record_count} records to {args.output}")
    return 0


def cmd_partition(args) -> int:
    manifest, records = ds.read_dataset(args.input)
    cfg = PartitionConfig(
        n_clients=args.clients,
        primary_fraction=args.primary_fraction,
        dirichlet_alpha=args.alpha,
        seed=args.seed,
    )
    shards = soft_split(records, cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for shard in shards:
        shard_manifest = ds.DatasetManifest(
            name=f"{manifest.name}.client{shard.client_id}",
            fingerprint_bits=manifest.fingerprint_bits,
            feature_groups=manifest.feature_groups,
            record_count=len(shard.records),
        )
        path = out_dir / f"{manifest.name}.client{shard.client_id}.tsv"
        ds.write_dataset(shard_manifest, shard.records, path)
        print(f"client {shard.client_id}: {len(shard.records)} records -> {path}")
    return 0


def cmd_run(args) -> int:
    cfg = _build_config(args)
    outcome = xp.run_experiment(cfg, _results_root(args.results_dir))
    print(f"results in {outcome.out_dir}")
    return 0


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v)


def cmd_grid(args) -> int:
    dataset, n_clients = _dataset_arg(args)
    method = args.method.replace("-", "_")
    base = xp.ExperimentConfig(
        dataset=dataset, method=method, n_clients=n_clients, seed=args.seed,
        primary_fraction=args.primary_fraction, dirichlet_alpha=args.alpha,
        unsafe_grid=args.unsafe_grid,
    )
    from dataclasses import replace
    if method == "fed_kmeans":
        grid = [replace(base, k=k, rounds=r) for k in args.k_values for r in args.rounds_values]
    elif method == "fed_pca_kmeans":
        grid = [replace(base, p=p, k=k, rounds=r)
                for p in args.p_values for k in args.k_values for r in args.rounds_values]
    elif method == "fed_lsh":
        grid = [replace(base, n_he=n) for n in args.nhe_values]
    else:
        raise xp.ConfigError(f"no grid for method {method!r}")

    root = _results_root(args.results_dir)
    table = xp.grid_search(grid, results_root=root)
    out = Path(args.out) if args.out else root / "ranks.csv"
    rows = [
        {"config": e.config_id, "dataset": e.dataset, "client": e.client,
         "metric": e.metric, "value": e.value, "rank": e.rank}
        for e in table.entries
    ]
    xp.write_csv(out, ("config", "dataset", "client", "metric", "value", "rank"), rows)
    for method_name, cid in sorted(table.best_per_method.items()):
        print(f"best {method_name}: {cid} (mean rank {table.mean_ranks[cid]:.3f})")
    print(f"rank table in {out}")
    return 0


def cmd_explain(args) -> int:
    manifest, records = ds.read_dataset(args.shard)
    stem, _, suffix = manifest.name.rpartition(".client")
    try:
        client_id = int(suffix)
    except ValueError:
        client_id = 0
    shard = ds.ClientShard(client_id=client_id, records=tuple(records))
    kinds = dict(manifest.feature_groups)

    run_dir = Path(args.run_dir)
    run_cfg = xp.read_config_file(run_dir / "config.txt")
    method = {"federated": run_cfg.method,
              "centralized": xp.CENTRALIZED_NAME[run_cfg.method],
              "random": "random"}[args.column]
    import csv as _csv
    with (run_dir / f"assignments.client{client_id}.csv").open(newline="", encoding="utf-8") as fh:
        label_by_id = {row["mol_id"]: int(row[args.column]) for row in _csv.DictReader(fh)}
    missing = [r.mol_id for r in records if r.mol_id not in label_by_id]
    if missing:
        raise ValueError(f"assignment file lacks labels for {len(missing)} records (first: {missing[0]})")
    labels = np.array([label_by_id[r.mol_id] for r in records])
    assignment = ClusterAssignment(labels, method, {"source": str(run_dir), "column": args.column})

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rf_cfg = RandomForestConfig(n_trees=args.trees, max_depth=args.max_depth, seed=args.seed)
    importance = rf_feature_group_importance(shard, assignment, rf_cfg, kinds)
    xp.write_csv(out_dir / "importance.csv", ("group", "importance"),
                 [{"group": g, "importance": v} for g, v in sorted(importance.items(), key=lambda kv: -kv[1])])

    xficf = {g: x_f_icf(records, labels, g, kinds.get(g)) for g in records[0].metadata}
    xp.write_csv(out_dir / "xficf.csv", ("group", "xficf"),
                 [{"group": g, "xficf": v} for g, v in sorted(xficf.items(), key=lambda kv: -kv[1])])

    stats = cluster_statistics(labels)
    xp.write_csv(out_dir / "cluster_stats.csv", ("n_clusters", "min_size", "max_size", "mean_size"),
                 [{"n_clusters": stats.n_clusters, "min_size": stats.min_size,
                   "max_size": stats.max_size, "mean_size": stats.mean_size}])

    sharing = feature_sharing_statistics(shard, kinds)
    xp.write_csv(out_dir / "sharing_stats.csv",
                 ("group", "unique_values", "mean_sharing", "min_sharing", "max_sharing"),
                 [{"group": g, "unique_values": s.unique_values, "mean_sharing": s.mean_sharing,
                   "min_sharing": s.min_sharing, "max_sharing": s.max_sharing}
                  for g, s in sharing.items()])

    over = overclustering_flag(assignment, shard)
    xp.write_csv(out_dir / "overclustering.csv", ("ratio", "flagged"),
                 [{"ratio": over.ratio, "flagged": over.flagged}])

    top = max(importance.items(), key=lambda kv: kv[1])
    print(f"top feature group: {top[0]} (importance {top[1]:.3f}); "
          f"overclustering {'flagged' if over.flagged else 'not flagged'} (ratio {over.ratio:.3f})")
    print(f"explainability tables in {out_dir}")
    return 0


def cmd_project(args) -> int:
    dataset, n_clients = _dataset_arg(args)
    cfg = xp.ExperimentConfig(dataset=dataset, method="fed_pca_kmeans",
                              n_clients=n_clients, seed=args.seed,
                              primary_fraction=args.primary_fraction,
                              dirichlet_alpha=args.alpha, unsafe_grid=True)
    _, _, shards = xp.load_shards(cfg)
    xp.export_projection(shards, args.p, args.out, seed=args.seed)
    print(f"projected coordinates in {args.out}")
    return 0


def cmd_report(args) -> int:
    paths = assemble_report(_results_root(args.results_dir), args.out_dir)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedmol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("--scaffolds", type=int, required=True)
    g.add_argument("--per-scaffold", type=int, required=True)
    g.add_argument("--core-bits", type=int, default=12)
    g.add_argument("--noise-bits", type=int, default=4)
    g.add_argument("--bits", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name", default=None)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("partition", help="split a dataset into client shards")
    p.add_argument("--input", required=True)
    p.add_argument("--clients", type=int, required=True)
    p.add_argument("--primary-fraction", type=float, default=0.9)
    p.add_argument("--alpha", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_partition)

    r = sub.add_parser("run", help="run one experiment with baselines")
    _add_run_like_flags(r)
    r.add_argument("--method", required=True,
                   choices=["fed-kmeans", "fed-pca-kmeans", "fed-lsh", "random"])
    r.add_argument("--k", type=int, default=None)
    r.add_argument("--rounds", type=int, default=None)
    r.add_argument("--p", type=int, default=None)
    r.add_argument("--n-he", type=int, default=None)
    r.add_argument("--config", default=None, help="flat key-value config file (overrides other flags)")
    r.set_defaults(func=cmd_run)

    gr = sub.add_parser("grid", help="hyperparameter grid search with rank aggregation")
    _add_run_like_flags(gr)
    gr.add_argument("--method", required=True, choices=["fed-kmeans", "fed-pca-kmeans", "fed-lsh"])
    gr.add_argument("--k-values", type=_int_list, default=xp.K_GRID)
    gr.add_argument("--rounds-values", type=_int_list, default=xp.ROUNDS_GRID)
    gr.add_argument("--p-values", type=_int_list, default=xp.P_GRID)
    gr.add_argument("--nhe-values", type=_int_list, default=xp.NHE_GRID)
    gr.add_argument("--out", default=None, help="rank table CSV path")
    gr.set_defaults(func=cmd_grid)

    e = sub.add_parser("explain", help="on-client explainability for one shard")
    e.add_argument("--shard", required=True, help="client TSV the assignment refers to")
    e.add_argument("--run-dir", required=True, help="experiment output directory (with config.txt)")
    e.add_argument("--column", default="federated", choices=["federated", "centralized", "random"])
    e.add_argument("--trees", type=int, default=100)
    e.add_argument("--max-depth", type=int, default=None)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out-dir", required=True)
    e.set_defaults(func=cmd_explain)

    pr = sub.add_parser("project", help="export PCA coordinates for qualitative plots")
    _add_run_like_flags(pr)
    pr.add_argument("--p", type=int, default=3)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_project)

    rp = sub.add_parser("report", help="assemble benchmark CSVs and figures")
    rp.add_argument("--results-dir", default=None)
    rp.add_argument("--out-dir", required=True)
    rp.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
