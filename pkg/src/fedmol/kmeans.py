"""Federated k-means (one local Lloyd step per round, count-weighted server
averaging) and its centralized baseline.

Clients may hand in raw fingerprint shards or already-projected coordinate
arrays; everything downstream treats points as real vectors with Euclidean
geometry, distance ties broken toward the lowest centroid index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import ClientShard, fingerprint_matrix
from .federation import FederatedProtocol, FederationConfig, RoundMessage, run_federation
from .metrics import ClusterAssignment


@dataclass(frozen=True)
class CentroidModel:
    centroids: np.ndarray  # (k, d)
    counts: np.ndarray     # (k,) per-centroid assignment counts

    def __post_init__(self):
        if len(self.centroids) != len(self.counts):
            raise ValueError("centroids and counts must have equal length")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("non-finite centroid")

    @property
    def k(self) -> int:
        return len(self.centroids)


def as_points(client_input) -> np.ndarray:
    """Coerce a ClientShard or an (n, d) array into float64 points."""
    if isinstance(client_input, ClientShard):
        return fingerprint_matrix(client_input.records).astype(np.float64)
    return np.asarray(client_input, dtype=np.float64)


def _nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + np.sum(centroids**2, axis=1)[None, :]
    )
    return np.argmin(d2, axis=1)  # argmin ties break toward the lowest index


def kmeanspp_init(points: np.ndarray, k: int, seed: int) -> CentroidModel:
    """k-means++ seeding: first centroid uniform, then D^2-proportional."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds {n} points")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    min_d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        total = float(min_d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=min_d2 / total))
        else:
            # every remaining point coincides with a chosen centroid
            remaining = sorted(set(range(n)) - set(chosen))
            idx = remaining[0]
        chosen.append(idx)
        min_d2 = np.minimum(min_d2, np.sum((points - points[idx]) ** 2, axis=1))
    return CentroidModel(centroids=points[chosen].copy(), counts=np.zeros(k, dtype=np.int64))


def local_kmeans_step(points: np.ndarray, global_model: CentroidModel) -> tuple[np.ndarray, np.ndarray]:
    """One Lloyd step against the broadcast centroids.

    Returns (local centroids, local counts); a cluster that captured no local
    points keeps the global centroid with count 0.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.shape[1] != global_model.centroids.shape[1]:
        raise ValueError(f"dimension mismatch: points d={points.shape[1]}, centroids d={global_model.centroids.shape[1]}")
    labels = _nearest(points, global_model.centroids)
    k = global_model.k
    centroids = global_model.centroids.copy()
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    for j in range(k):
        if counts[j] > 0:
            centroids[j] = points[labels == j].mean(axis=0)
    return centroids, counts


def aggregate_centroids(messages: Sequence[RoundMessage], previous: CentroidModel) -> CentroidModel:
    """Count-weighted average of client centroids; empty clusters keep the previous centroid."""
    payloads = [m.payload for m in messages]
    k = previous.k
    for centroids, counts in payloads:
        if len(centroids) != k or len(counts) != k:
            raise ValueError("inconsistent k across client messages")
    if len(payloads) == 1:
        # exact identity keeps single-client federation bit-equal to the local step
        centroids, counts = payloads[0]
        merged = np.where(counts[:, None] > 0, centroids, previous.centroids)
        return CentroidModel(centroids=merged, counts=counts.astype(np.int64))
    total = np.zeros(k, dtype=np.int64)
    weighted = np.zeros_like(previous.centroids)
    for centroids, counts in payloads:
        total += counts
        weighted += counts[:, None] * centroids
    merged = previous.centroids.copy()
    nonzero = total > 0
    merged[nonzero] = weighted[nonzero] / total[nonzero, None]
    return CentroidModel(centroids=merged, counts=total)


class KMeansProtocol(FederatedProtocol):
    """Broadcast centroids, take one local Lloyd step per client, aggregate."""

    def __init__(self, initial: CentroidModel, local_iterations: int = 1):
        self.initial = initial
        self.local_iterations = local_iterations

    def init_server(self, cfg: FederationConfig) -> CentroidModel:
        return self.initial

    def run_client(self, client_input, state: CentroidModel, round_index, rng):
        points = as_points(client_input)
        model = state
        for _ in range(self.local_iterations):
            centroids, counts = local_kmeans_step(points, model)
            model = CentroidModel(centroids=centroids, counts=counts)
        return model.centroids, model.counts

    def aggregate(self, state: CentroidModel, messages, round_index) -> CentroidModel:
        return aggregate_centroids(messages, previous=state)

    def finalize_client(self, client_input, state: CentroidModel) -> np.ndarray:
        return _nearest(as_points(client_input), state.centroids)


def fed_kmeans(
    client_inputs: Sequence,
    k: int,
    rounds: int,
    seed: int,
    local_iterations: int = 1,
    parallel: bool = False,
    method: str = "fed_kmeans",
) -> tuple[CentroidModel, list[ClusterAssignment]]:
    """Run federated k-means over client shards (or projected point arrays).

    The first round's k-means++ initialization runs on client 0's data with
    the given seed, matching the centralized baseline's init so a one-client
    federation reproduces it exactly.
    """
    total = sum(len(as_points(ci)) for ci in client_inputs)
    if total < k:
        raise ValueError(f"k={k} exceeds {total} total points")
    initial = kmeanspp_init(as_points(client_inputs[0]), k, seed)
    cfg = FederationConfig(n_clients=len(client_inputs), rounds=rounds, seed=seed)
    result = run_federation(client_inputs, KMeansProtocol(initial, local_iterations), cfg, parallel=parallel)
    provenance = {"k": k, "rounds": rounds, "seed": seed, "local_iterations": local_iterations}
    assignments = [
        ClusterAssignment(labels, method, dict(provenance, client_id=cid))
        for cid, labels in enumerate(result.client_outputs)
    ]
    return result.server_state, assignments


def centralized_kmeans(
    points: np.ndarray,
    k: int,
    iterations: int,
    seed: int,
    method: str = "centralized_kmeans",
) -> tuple[CentroidModel, ClusterAssignment]:
    """k-means++ init followed by a fixed number of Lloyd iterations."""
    points = as_points(points)
    model = kmeanspp_init(points, k, seed)
    for _ in range(iterations):
        centroids, counts = local_kmeans_step(points, model)
        model = CentroidModel(centroids=centroids, counts=counts)
    labels = _nearest(points, model.centroids)
    assignment = ClusterAssignment(labels, method, {"k": k, "iterations": iterations, "seed": seed})
    return model, assignment


def inertia(client_inputs: Sequence, model: CentroidModel) -> float:
    """Total squared distance from every point to its nearest centroid."""
    total = 0.0
    for ci in client_inputs:
        points = as_points(ci)
        labels = _nearest(points, model.centroids)
        total += float(np.sum((points - model.centroids[labels]) ** 2))
    return total
