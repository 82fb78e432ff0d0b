"""Exact federated PCA via the cross-client decomposable scatter matrix.

Each client contributes (sum x, sum x x^T, count); the server assembles the
pooled scatter around the global mean algebraically in a single round, so the
federated covariance matches the centralized one up to floating-point noise.
The scatter is left unscaled (no 1/(M-1)): eigenvectors are scale-invariant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .federation import FederatedProtocol, FederationConfig, run_federation
from .kmeans import CentroidModel, as_points, fed_kmeans
from .metrics import ClusterAssignment


@dataclass(frozen=True)
class CovarianceAccumulator:
    sum_x: np.ndarray      # (F,)
    sum_outer: np.ndarray  # (F, F)
    count: int

    def merge(self, other: "CovarianceAccumulator") -> "CovarianceAccumulator":
        return CovarianceAccumulator(
            sum_x=self.sum_x + other.sum_x,
            sum_outer=self.sum_outer + other.sum_outer,
            count=self.count + other.count,
        )


@dataclass(frozen=True)
class ProjectionMatrix:
    components: np.ndarray   # (p, F) orthonormal rows
    eigenvalues: np.ndarray  # (p,) descending
    mean: np.ndarray         # (F,)

    @property
    def p(self) -> int:
        return len(self.components)


def local_covariance_partials(client_input) -> CovarianceAccumulator:
    """Exact local sums; nothing about individual records leaves the client."""
    points = as_points(client_input)
    if len(points) == 0:
        raise ValueError("empty shard")
    return CovarianceAccumulator(
        sum_x=points.sum(axis=0),
        sum_outer=points.T @ points,
        count=len(points),
    )


def assemble_covariance(accumulators: Sequence[CovarianceAccumulator]) -> np.ndarray:
    """Pooled scatter matrix around the global mean: sum x x^T - (sum x)(sum x)^T / M."""
    merged = accumulators[0]
    for acc in accumulators[1:]:
        merged = merged.merge(acc)
    if merged.count < 2:
        raise ValueError("covariance needs at least 2 records in total")
    c = merged.sum_outer - np.outer(merged.sum_x, merged.sum_x) / merged.count
    return (c + c.T) / 2.0


def eigendecompose(cov: np.ndarray, mean: np.ndarray, p: int) -> ProjectionMatrix:
    """Top-p eigenpairs with a fixed sign convention (largest-|entry| positive)."""
    if not 1 <= p <= cov.shape[0]:
        raise ValueError(f"p={p} out of range for F={cov.shape[0]}")
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:p]
    components = eigenvectors[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return ProjectionMatrix(components=components, eigenvalues=eigenvalues[order].copy(), mean=mean)


class PcaProtocol(FederatedProtocol):
    """One round: collect covariance partials, assemble, decompose server-side."""

    def __init__(self, p: int):
        self.p = p

    def init_server(self, cfg: FederationConfig):
        return None

    def run_client(self, client_input, state, round_index, rng) -> CovarianceAccumulator:
        return local_covariance_partials(client_input)

    def aggregate(self, state, messages, round_index) -> ProjectionMatrix:
        accumulators = [m.payload for m in messages]
        cov = assemble_covariance(accumulators)
        merged = accumulators[0]
        for acc in accumulators[1:]:
            merged = merged.merge(acc)
        return eigendecompose(cov, mean=merged.sum_x / merged.count, p=self.p)

    def done(self, state) -> bool:
        return isinstance(state, ProjectionMatrix)


def fed_pca(client_inputs: Sequence, p: int, seed: int = 0, parallel: bool = False) -> ProjectionMatrix:
    cfg = FederationConfig(n_clients=len(client_inputs), rounds=1, seed=seed)
    result = run_federation(client_inputs, PcaProtocol(p), cfg, parallel=parallel)
    return result.server_state


def project(client_input, proj: ProjectionMatrix) -> np.ndarray:
    """Order-preserving projection y = P (x - mean) per record."""
    points = as_points(client_input)
    if points.shape[1] != proj.components.shape[1]:
        raise ValueError(f"dimension mismatch: points d={points.shape[1]}, projection F={proj.components.shape[1]}")
    return (points - proj.mean) @ proj.components.T


def centralized_pca(points: np.ndarray, p: int) -> ProjectionMatrix:
    """PCA of pooled data through the same scatter construction."""
    return eigendecompose(
        assemble_covariance([local_covariance_partials(points)]),
        mean=as_points(points).mean(axis=0),
        p=p,
    )


def fed_pca_kmeans(
    client_inputs: Sequence,
    p: int,
    k: int,
    rounds: int,
    seed: int,
    parallel: bool = False,
) -> tuple[CentroidModel, list[ClusterAssignment], ProjectionMatrix]:
    """Fed-PCA to p dimensions, then fed-kmeans on the projected shards."""
    proj = fed_pca(client_inputs, p, seed=seed, parallel=parallel)
    projected = [project(ci, proj) for ci in client_inputs]
    model, assignments = fed_kmeans(
        projected, k, rounds, seed, parallel=parallel, method="fed_pca_kmeans"
    )
    for a in assignments:
        a.provenance["p"] = p
    return model, assignments, proj
