"""On-client cluster explainability.

Reverse-engineers an assignment by training a random forest (CART, Gini,
bootstrap, feature subsampling) on the shard's encoded metadata to predict
cluster labels, then aggregating mean-impurity-decrease importances per
feature group.  Also provides cluster count/size and value-sharing statistics
and the overclustering diagnostic.  Nothing here pools data across clients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import ClientShard, infer_feature_kinds
from .metrics import ClusterAssignment, ClusterStats, cluster_statistics, dense_labels
from .util import derive_seed

__all__ = [
    "RandomForestConfig", "RandomForestClassifier", "encode_metadata",
    "rf_feature_group_importance", "cluster_statistics", "ClusterStats",
    "feature_sharing_statistics", "ValueSharingStats",
    "overclustering_flag", "OverclusteringReport",
]


@dataclass(frozen=True)
class RandomForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    features_per_split: int | None = None  # None: round(sqrt(n_features))
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


def encode_metadata(
    shard: ClientShard,
    feature_kinds: dict[str, str] | None = None,
) -> tuple[np.ndarray, list[str], list[str]]:
    """Build the design matrix from a shard's metadata.

    Categorical groups are one-hot encoded (dedicated NA column when missing
    values occur), numeric groups pass through as one column (mean-imputed
    plus an NA indicator when values are missing).  Column order is group
    order, then lexicographic value order.

    Returns (matrix, per-column group name, per-column label).
    """
    records = shard.records
    if feature_kinds is None:
        feature_kinds = infer_feature_kinds(records)
    columns: list[np.ndarray] = []
    groups: list[str] = []
    names: list[str] = []
    for group in records[0].metadata:
        values = [rec.metadata.get(group) for rec in records]
        has_na = any(v is None for v in values)
        if feature_kinds.get(group) == "numeric":
            present = np.array([v for v in values if v is not None], dtype=np.float64)
            fill = float(present.mean()) if present.size else 0.0
            columns.append(np.array([fill if v is None else float(v) for v in values]))
            groups.append(group)
            names.append(group)
        else:
            for value in sorted({v for v in values if v is not None}):
                columns.append(np.array([1.0 if v == value else 0.0 for v in values]))
                groups.append(group)
                names.append(f"{group}={value}")
        if has_na:
            columns.append(np.array([1.0 if v is None else 0.0 for v in values]))
            groups.append(group)
            names.append(f"{group}=NA")
    matrix = np.column_stack(columns) if columns else np.zeros((len(records), 0))
    return matrix, groups, names


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "prediction")

    def __init__(self, prediction: int):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.prediction = prediction


class _Tree:
    def __init__(self, n_classes: int, cfg: RandomForestConfig, mtry: int, rng: np.random.Generator):
        self.n_classes = n_classes
        self.cfg = cfg
        self.mtry = mtry
        self.rng = rng

    def fit(self, x: np.ndarray, y: np.ndarray) -> tuple[_Node, np.ndarray]:
        self.x = x
        self.y = y
        self.n_total = len(y)
        self.importances = np.zeros(x.shape[1])
        root = _Node(prediction=0)
        # explicit stack (left pushed last, so processed first, matching recursion order)
        stack: list[tuple[np.ndarray, int, _Node]] = [(np.arange(len(y)), 0, root)]
        while stack:
            idx, depth, node = stack.pop()
            counts = np.bincount(self.y[idx], minlength=self.n_classes)
            node.prediction = int(np.argmax(counts))
            impurity = _gini(counts)
            if (
                impurity == 0.0
                or len(idx) < 2 * self.cfg.min_samples_leaf
                or (self.cfg.max_depth is not None and depth >= self.cfg.max_depth)
            ):
                continue
            split = self._best_split(idx, impurity)
            if split is None:
                continue
            feature, threshold, gain = split
            node.feature = feature
            node.threshold = threshold
            self.importances[feature] += (len(idx) / self.n_total) * gain
            mask = self.x[idx, feature] <= threshold
            node.left = _Node(prediction=node.prediction)
            node.right = _Node(prediction=node.prediction)
            stack.append((idx[~mask], depth + 1, node.right))
            stack.append((idx[mask], depth + 1, node.left))
        return root, self.importances

    def _best_split(self, idx: np.ndarray, parent_impurity: float):
        n_features = self.x.shape[1]
        tried = self.rng.choice(n_features, size=min(self.mtry, n_features), replace=False)
        tried.sort()  # deterministic evaluation order independent of draw order
        best = None
        n = len(idx)
        min_leaf = self.cfg.min_samples_leaf
        for feature in tried:
            vals = self.x[idx, feature]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            sy = self.y[idx][order]
            distinct = sv[1:] > sv[:-1]
            if not distinct.any():
                continue
            onehot = np.zeros((n, self.n_classes))
            onehot[np.arange(n), sy] = 1.0
            left_counts = np.cumsum(onehot, axis=0)[:-1]
            total_counts = left_counts[-1] + onehot[-1]
            n_left = np.arange(1, n, dtype=np.float64)
            n_right = n - n_left
            with np.errstate(invalid="ignore", divide="ignore"):
                gini_left = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
                gini_right = 1.0 - np.sum(((total_counts - left_counts) / n_right[:, None]) ** 2, axis=1)
            weighted = (n_left * gini_left + n_right * gini_right) / n
            ok = distinct & (n_left >= min_leaf) & (n_right >= min_leaf)
            if not ok.any():
                continue
            weighted[~ok] = np.inf
            pos = int(np.argmin(weighted))
            gain = parent_impurity - float(weighted[pos])
            if gain <= 1e-12:
                continue
            if best is None or gain > best[2]:
                best = (int(feature), float((sv[pos] + sv[pos + 1]) / 2.0), gain)
        return best


class RandomForestClassifier:
    """Deterministic bootstrap forest; importances are mean decrease in Gini."""

    def __init__(self, cfg: RandomForestConfig):
        self.cfg = cfg
        self.trees: list[_Node] = []
        self.feature_importances_: np.ndarray | None = None
        self.n_classes = 0

    def fit(self, x: np.ndarray, y: np.ndarray) -> "RandomForestClassifier":
        y = np.asarray(y, dtype=np.int64)
        self.n_classes = int(y.max()) + 1
        n, m = x.shape
        mtry = self.cfg.features_per_split or max(1, round(math.sqrt(m)))
        importances = np.zeros(m)
        self.trees = []
        for t in range(self.cfg.n_trees):
            rng = np.random.default_rng(derive_seed(self.cfg.seed, "tree", t))
            sample = rng.integers(0, n, size=n)
            tree = _Tree(self.n_classes, self.cfg, mtry, rng)
            root, tree_importances = tree.fit(x[sample], y[sample])
            self.trees.append(root)
            importances += tree_importances
        self.feature_importances_ = importances / self.cfg.n_trees
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        votes = np.zeros((len(x), self.n_classes), dtype=np.int64)
        for root in self.trees:
            for i, row in enumerate(x):
                node = root
                while node.left is not None:
                    node = node.left if row[node.feature] <= node.threshold else node.right
                votes[i, node.prediction] += 1
        return np.argmax(votes, axis=1)


def rf_feature_group_importance(
    shard: ClientShard,
    assignment: ClusterAssignment,
    cfg: RandomForestConfig,
    feature_kinds: dict[str, str] | None = None,
) -> dict[str, float]:
    """Per-group importances (summed over the group's columns, normalized to 1)."""
    labels = dense_labels(assignment.labels)
    sizes = np.bincount(labels)
    if len(sizes) < 2:
        raise ValueError("feature importance needs at least 2 clusters")
    if (sizes < 2).any():
        raise ValueError("feature importance needs >= 2 records in every cluster")
    matrix, groups, _ = encode_metadata(shard, feature_kinds)
    forest = RandomForestClassifier(cfg).fit(matrix, labels)
    by_group: dict[str, float] = {g: 0.0 for g in shard.records[0].metadata}
    for column, importance in zip(groups, forest.feature_importances_):
        by_group[column] += float(importance)
    total = sum(by_group.values())
    if total <= 0.0:
        # no split ever improved purity; report an uninformative uniform ranking
        return {g: 1.0 / len(by_group) for g in by_group}
    return {g: v / total for g, v in by_group.items()}


@dataclass(frozen=True)
class ValueSharingStats:
    unique_values: int
    mean_sharing: float
    min_sharing: int
    max_sharing: int


def feature_sharing_statistics(
    shard: ClientShard,
    feature_kinds: dict[str, str] | None = None,
) -> dict[str, ValueSharingStats]:
    """How many molecules share each metadata value, per group (NA is a value)."""
    records = shard.records
    out: dict[str, ValueSharingStats] = {}
    for group in records[0].metadata:
        counts: dict[object, int] = {}
        for rec in records:
            value = rec.metadata.get(group)
            counts[value] = counts.get(value, 0) + 1
        sizes = list(counts.values())
        out[group] = ValueSharingStats(
            unique_values=len(sizes),
            mean_sharing=float(len(records) / len(sizes)),
            min_sharing=min(sizes),
            max_sharing=max(sizes),
        )
    return out


@dataclass(frozen=True)
class OverclusteringReport:
    ratio: float  # mean cluster size / mean molecules sharing the reference value
    flagged: bool


def overclustering_flag(
    assignment: ClusterAssignment,
    shard: ClientShard,
    reference_group: str = "scaffold",
) -> OverclusteringReport:
    """Flag partitions finer than the reference feature's natural grouping."""
    stats = cluster_statistics(assignment.labels)
    if reference_group == "scaffold" and "scaffold" not in shard.records[0].metadata:
        values = [rec.scaffold for rec in shard.records]
    else:
        values = [rec.metadata.get(reference_group) for rec in shard.records]
    unique = len(set(values))
    mean_sharing = len(shard.records) / unique
    ratio = stats.mean_size / mean_sharing
    return OverclusteringReport(ratio=float(ratio), flagged=bool(ratio < 1.0))
