"""Cluster evaluation metrics: Euclidean and Tanimoto silhouettes,
Calinski-Harabasz, Davies-Bouldin, the scaffold-frequency /
inverse-cluster-frequency family (SF, ICF, SF-ICF and its generalization to
arbitrary metadata groups), per-cluster scaffold KL divergence, and the
random-assignment noise baseline.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import ClientShard, MoleculeRecord, fingerprint_matrix, infer_feature_kinds, tanimoto_matrix

METHODS = frozenset({
    "fed_kmeans", "fed_pca_kmeans", "fed_lsh",
    "centralized_kmeans", "centralized_pca_kmeans", "centralized_lsh",
    "random",
})

# +1: higher is better; -1: lower is better (rank-direction normalization)
METRIC_DIRECTIONS = {
    "silhouette_euclidean": +1,
    "davies_bouldin": -1,
    "calinski_harabasz": +1,
    "silhouette_tanimoto": +1,
    "sf_icf": +1,
}


class DegenerateMetricError(ValueError):
    """The metric is undefined on this input (e.g. a single cluster)."""


@dataclass
class ClusterAssignment:
    """Per-record cluster labels for one shard, with method/config provenance."""

    labels: np.ndarray
    method: str
    provenance: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def n_clusters(self) -> int:
        return int(len(np.unique(self.labels)))


@dataclass(frozen=True)
class ClusterStats:
    n_clusters: int
    min_size: int
    max_size: int
    mean_size: float


def dense_labels(labels: Sequence[int] | np.ndarray) -> np.ndarray:
    """Relabel to dense ids 0..k-1 (metrics are invariant under relabeling)."""
    _, dense = np.unique(np.asarray(labels), return_inverse=True)
    return dense.astype(np.int64)


def cluster_statistics(labels: Sequence[int] | np.ndarray) -> ClusterStats:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("no labels")
    sizes = np.bincount(dense_labels(labels))
    return ClusterStats(
        n_clusters=len(sizes),
        min_size=int(sizes.min()),
        max_size=int(sizes.max()),
        mean_size=float(labels.size / len(sizes)),
    )


def euclidean_distance_matrix(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    sq = np.sum(points**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def silhouette_from_distances(distances: np.ndarray, labels) -> float:
    """Mean silhouette over points: (b-a)/max(a,b); singleton clusters score 0."""
    labels = dense_labels(labels)
    n = len(labels)
    if distances.shape != (n, n):
        raise ValueError(f"distance matrix shape {distances.shape} does not match {n} labels")
    k = int(labels.max()) + 1
    if k < 2:
        raise DegenerateMetricError("silhouette undefined for a single cluster")
    if n < 2:
        raise DegenerateMetricError("silhouette needs at least 2 points")

    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sums = distances @ onehot  # (n, k): total distance from each point to each cluster
    counts = onehot.sum(axis=0)

    own = counts[labels]
    scores = np.zeros(n)
    nontrivial = own > 1  # singleton-cluster points keep score 0
    a = np.zeros(n)
    a[nontrivial] = sums[np.arange(n), labels][nontrivial] / (own[nontrivial] - 1)

    mean_to = sums / counts[None, :]
    mean_to[np.arange(n), labels] = np.inf
    b = mean_to.min(axis=1)

    denom = np.maximum(a, b)
    ok = nontrivial & (denom > 0)
    scores[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(scores.mean())


def silhouette_euclidean(points: np.ndarray, labels) -> float:
    return silhouette_from_distances(euclidean_distance_matrix(points), labels)


def calinski_harabasz(points: np.ndarray, labels) -> float:
    """(B/(k-1)) / (W/(n-k)); zero within-cluster scatter yields an inf sentinel."""
    points = np.asarray(points, dtype=np.float64)
    labels = dense_labels(labels)
    n = len(points)
    k = int(labels.max()) + 1
    if k < 2:
        raise DegenerateMetricError("calinski_harabasz undefined for a single cluster")
    overall = points.mean(axis=0)
    w = 0.0
    b = 0.0
    for j in range(k):
        cluster = points[labels == j]
        mu = cluster.mean(axis=0)
        w += float(np.sum((cluster - mu) ** 2))
        b += len(cluster) * float(np.sum((mu - overall) ** 2))
    if w == 0.0:
        if b == 0.0:
            raise DegenerateMetricError("calinski_harabasz undefined: all points identical")
        return math.inf
    return float((b / (k - 1)) / (w / (n - k)))


def davies_bouldin(points: np.ndarray, labels) -> float:
    """Mean over clusters of the worst (sigma_i + sigma_j) / centroid distance."""
    points = np.asarray(points, dtype=np.float64)
    labels = dense_labels(labels)
    k = int(labels.max()) + 1
    if k < 2:
        raise DegenerateMetricError("davies_bouldin undefined for a single cluster")
    centroids = np.vstack([points[labels == j].mean(axis=0) for j in range(k)])
    sigma = np.array([
        float(np.linalg.norm(points[labels == j] - centroids[j], axis=1).mean()) for j in range(k)
    ])
    dist = euclidean_distance_matrix(centroids)
    ratios = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            spread = sigma[i] + sigma[j]
            if dist[i, j] == 0.0:
                ratios[i, j] = 0.0 if spread == 0.0 else math.inf
            else:
                ratios[i, j] = spread / dist[i, j]
    return float(ratios.max(axis=1).mean())


def sf(key: str, cluster_keys: Sequence[str]) -> float:
    """Within-cluster frequency of one key: |{key in c}| / |c|."""
    if not cluster_keys:
        raise ValueError("empty cluster")
    return sum(1 for k in cluster_keys if k == key) / len(cluster_keys)


def icf(key: str, clusters: Sequence[Sequence[str]]) -> float:
    """log(|C| / #clusters containing key) / log(|C|).

    Defined as 0 when |C| == 1 (a single cluster carries no separation
    information) and when the key is absent from every cluster.
    """
    n_clusters = len(clusters)
    if n_clusters == 0:
        raise ValueError("no clusters")
    if n_clusters == 1:
        return 0.0
    df = sum(1 for cluster in clusters if key in set(cluster))
    if df == 0:
        return 0.0
    return math.log(n_clusters / df) / math.log(n_clusters)


def _cluster_key_lists(keys: Sequence[str], labels) -> list[list[str]]:
    labels = dense_labels(labels)
    clusters: list[list[str]] = [[] for _ in range(int(labels.max()) + 1)]
    for key, label in zip(keys, labels):
        clusters[label].append(key)
    return clusters


def per_cluster_sf_icf(keys: Sequence[str], labels) -> list[float]:
    """Inner sum of the weighted score per cluster: sum over distinct keys of SF*ICF."""
    if len(keys) == 0:
        raise ValueError("empty input")
    clusters = _cluster_key_lists(keys, labels)
    n_clusters = len(clusters)
    df: Counter[str] = Counter()
    for cluster in clusters:
        df.update(set(cluster))
    log_c = math.log(n_clusters) if n_clusters > 1 else 0.0

    scores = []
    for cluster in clusters:
        size = len(cluster)
        counts = Counter(cluster)
        total = 0.0
        for key, count in counts.items():
            key_icf = (math.log(n_clusters / df[key]) / log_c) if n_clusters > 1 else 0.0
            total += (count / size) * key_icf
        scores.append(total)
    return scores


def sf_icf(keys: Sequence[str], labels) -> float:
    """Cluster-size-weighted sum of per-cluster SF*ICF totals, in [0, 1]."""
    clusters = _cluster_key_lists(keys, labels)
    n = len(keys)
    scores = per_cluster_sf_icf(keys, labels)
    return float(sum(len(cluster) / n * score for cluster, score in zip(clusters, scores)))


def metadata_keys(records: Sequence[MoleculeRecord], group: str, kind: str | None = None) -> list[str]:
    """Categorical keys for one metadata group; numeric groups are decile-binned on-client."""
    if group not in records[0].metadata:
        raise KeyError(f"unknown metadata group {group!r}")
    if kind is None:
        kind = infer_feature_kinds(records)[group]
    values = [rec.metadata.get(group) for rec in records]
    if kind == "categorical":
        return ["NA" if v is None else str(v) for v in values]
    present = np.array([v for v in values if v is not None], dtype=np.float64)
    if present.size == 0:
        return ["NA"] * len(values)
    edges = np.quantile(present, np.linspace(0.1, 0.9, 9))
    return [
        "NA" if v is None else f"q{int(np.searchsorted(edges, v, side='right'))}"
        for v in values
    ]


def x_f_icf(records: Sequence[MoleculeRecord], labels, group: str, kind: str | None = None) -> float:
    """SF-ICF generalized to any metadata feature group."""
    return sf_icf(metadata_keys(records, group, kind), labels)


def scaffold_kld(keys: Sequence[str], labels) -> dict[int, float]:
    """Per-cluster KL divergence of the cluster's key distribution from the global one.

    Natural log; every key present in a cluster is present globally by
    construction, so the divergence is always finite and >= 0.
    """
    labels = dense_labels(labels)
    n = len(keys)
    global_counts = Counter(keys)
    out: dict[int, float] = {}
    for j in range(int(labels.max()) + 1):
        cluster = [keys[i] for i in range(n) if labels[i] == j]
        size = len(cluster)
        div = 0.0
        for key, count in Counter(cluster).items():
            p_cond = count / size
            p_global = global_counts[key] / n
            div += p_cond * math.log(p_cond / p_global)
        out[j] = max(div, 0.0)
    return out


def random_assignment(n_records: int, n_clusters: int, seed: int) -> ClusterAssignment:
    """Uniform i.i.d. labels, compacted to dense ids."""
    if n_records < 1 or n_clusters < 1:
        raise ValueError("need at least one record and one cluster")
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, n_clusters, size=n_records)
    return ClusterAssignment(dense_labels(raw), "random", {"n_clusters": n_clusters, "seed": seed})


@dataclass
class MetricsReport:
    silhouette_euclidean: float | None
    davies_bouldin: float | None
    calinski_harabasz: float | None
    silhouette_tanimoto: float | None
    sf_icf: float | None
    per_feature_group_ficf: dict[str, float]
    cluster_stats: ClusterStats
    flags: dict[str, str] = field(default_factory=dict)

    def scalar_metrics(self) -> dict[str, float | None]:
        return {
            "silhouette_euclidean": self.silhouette_euclidean,
            "davies_bouldin": self.davies_bouldin,
            "calinski_harabasz": self.calinski_harabasz,
            "silhouette_tanimoto": self.silhouette_tanimoto,
            "sf_icf": self.sf_icf,
        }


def evaluate(
    shard: ClientShard,
    assignment: ClusterAssignment,
    points: np.ndarray | None = None,
    feature_kinds: dict[str, str] | None = None,
) -> MetricsReport:
    """Compute the full on-client metric set for one assignment.

    ``points`` is the feature space the clustering ran in (raw fingerprints by
    default, PCA coordinates for projected methods); the Tanimoto silhouette
    always uses the raw fingerprints.  Degenerate metrics are flagged missing
    rather than fabricated.
    """
    records = shard.records
    labels = assignment.labels
    if len(labels) != len(records):
        raise ValueError(f"{len(labels)} labels for {len(records)} records")
    fps = fingerprint_matrix(records)
    if points is None:
        points = fps.astype(np.float64)
    if feature_kinds is None:
        feature_kinds = infer_feature_kinds(records)

    flags: dict[str, str] = {}

    def guarded(name, fn):
        try:
            value = fn()
        except DegenerateMetricError as exc:
            flags[name] = str(exc)
            return None
        if isinstance(value, float) and math.isinf(value):
            flags[name] = "infinite sentinel (zero within-cluster scatter)"
        return value

    scaffolds = [r.scaffold for r in records]
    report = MetricsReport(
        silhouette_euclidean=guarded("silhouette_euclidean", lambda: silhouette_euclidean(points, labels)),
        davies_bouldin=guarded("davies_bouldin", lambda: davies_bouldin(points, labels)),
        calinski_harabasz=guarded("calinski_harabasz", lambda: calinski_harabasz(points, labels)),
        silhouette_tanimoto=guarded(
            "silhouette_tanimoto", lambda: silhouette_from_distances(tanimoto_matrix(fps), labels)
        ),
        sf_icf=guarded("sf_icf", lambda: sf_icf(scaffolds, labels)),
        per_feature_group_ficf={
            group: x_f_icf(records, labels, group, feature_kinds.get(group))
            for group in records[0].metadata
        },
        cluster_stats=cluster_statistics(labels),
        flags=flags,
    )
    return report
