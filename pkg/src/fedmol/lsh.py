"""Federated locality-sensitive hashing on high-entropy fingerprint bits.

Each client reports the indices of its locally highest-entropy bit positions;
the server intersects the reports into a consensus set (doubling the local
set size when the intersection comes up empty) and broadcasts it back.
Molecules sharing identical values on the consensus bits share a bin.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .dataset import ClientShard, MoleculeRecord, fingerprint_matrix
from .federation import FederatedProtocol, FederationConfig, ProtocolError, run_federation
from .metrics import ClusterAssignment


def bit_entropies(fps: np.ndarray) -> np.ndarray:
    """Shannon entropy (bits) of each fingerprint position; H(0)=H(1)=0."""
    q = (np.asarray(fps) != 0).mean(axis=0)
    h = np.zeros_like(q, dtype=np.float64)
    inner = (q > 0) & (q < 1)
    qi = q[inner]
    h[inner] = -qi * np.log2(qi) - (1 - qi) * np.log2(1 - qi)
    return h


def top_entropy_bits(fps: np.ndarray, n_he: int) -> tuple[int, ...]:
    """Indices of the n_he highest-entropy bits, ties toward the lower index."""
    n_bits = fps.shape[1]
    if not 1 <= n_he <= n_bits:
        raise ValueError(f"n_he={n_he} out of range for F={n_bits}")
    entropies = bit_entropies(fps)
    order = np.argsort(-entropies, kind="stable")
    return tuple(sorted(int(i) for i in order[:n_he]))


def local_top_entropy_bits(shard: ClientShard, n_he: int) -> tuple[int, ...]:
    return top_entropy_bits(fingerprint_matrix(shard.records), n_he)


def intersect_bits(bit_sets: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Sorted intersection of the clients' reported bit-index sets."""
    if not bit_sets:
        raise ValueError("no bit sets to intersect")
    common = set(bit_sets[0])
    for bits in bit_sets[1:]:
        common &= set(bits)
    return tuple(sorted(common))


def bin_keys(fps: np.ndarray, global_bits: Sequence[int]) -> list[bytes]:
    selected = fps[:, sorted(global_bits)].astype(np.uint8)
    return [row.tobytes() for row in selected]


def lsh_assign(
    shard_or_fps,
    global_bits: Sequence[int],
    method: str = "fed_lsh",
    provenance: dict | None = None,
) -> ClusterAssignment:
    """Bin by the fingerprint restricted to the consensus bits.

    Labels follow first-occurrence order within the client; the bin key itself
    is the cross-client cluster identifier and is kept in the provenance.
    """
    fps = shard_or_fps if isinstance(shard_or_fps, np.ndarray) else fingerprint_matrix(shard_or_fps.records)
    if max(global_bits) >= fps.shape[1]:
        raise ValueError("bit index out of range")
    keys = bin_keys(fps, global_bits)
    label_of: dict[bytes, int] = {}
    labels = np.empty(len(keys), dtype=np.int64)
    for i, key in enumerate(keys):
        if key not in label_of:
            label_of[key] = len(label_of)
        labels[i] = label_of[key]
    prov = dict(provenance or {})
    prov["global_bits"] = tuple(sorted(int(b) for b in global_bits))
    return ClusterAssignment(labels, method, prov)


class LshProtocol(FederatedProtocol):
    """Report local top-entropy bits, intersect, retry with doubled n_he if empty."""

    def __init__(self, n_he: int, n_bits: int, max_doublings: int = 5):
        if not 1 <= n_he <= n_bits:
            raise ValueError(f"n_he={n_he} out of range for F={n_bits}")
        self.n_he = n_he
        self.n_bits = n_bits
        self.max_doublings = max_doublings

    def init_server(self, cfg: FederationConfig) -> dict:
        return {"n_he": self.n_he, "global_bits": None}

    def run_client(self, shard, state, round_index, rng) -> tuple[int, ...]:
        return local_top_entropy_bits(shard, state["n_he"])

    def aggregate(self, state, messages, round_index) -> dict:
        common = intersect_bits([m.payload for m in messages])
        if common:
            return {"n_he": state["n_he"], "global_bits": common}
        if state["n_he"] >= self.n_bits:
            raise ProtocolError("empty bit intersection at n_he = F (no clients responded?)")
        if round_index >= self.max_doublings:
            raise ProtocolError(
                f"bit intersection still empty after {self.max_doublings} doublings (n_he={state['n_he']})"
            )
        return {"n_he": min(2 * state["n_he"], self.n_bits), "global_bits": None}

    def done(self, state) -> bool:
        return state["global_bits"] is not None

    def finalize_client(self, shard, state) -> ClusterAssignment:
        return lsh_assign(shard, state["global_bits"], method="fed_lsh", provenance={"n_he": self.n_he})


def fed_lsh(
    shards: Sequence[ClientShard],
    n_he: int,
    max_doublings: int = 5,
    seed: int = 0,
    parallel: bool = False,
) -> tuple[tuple[int, ...], list[ClusterAssignment]]:
    """One bit-consensus exchange (plus any doubling retries), then local binning."""
    n_bits = len(shards[0].records[0].fingerprint)  # fingerprint width is shared schema
    protocol = LshProtocol(n_he, n_bits, max_doublings)
    cfg = FederationConfig(n_clients=len(shards), rounds=max_doublings + 1, seed=seed)
    result = run_federation(shards, protocol, cfg, parallel=parallel)
    state = result.server_state
    if state["global_bits"] is None:
        raise ProtocolError("federated LSH ended without a consensus bit set")
    return state["global_bits"], result.client_outputs


def centralized_lsh(
    records: Sequence[MoleculeRecord],
    n_he: int,
    method: str = "centralized_lsh",
) -> ClusterAssignment:
    """Pooled-data baseline: top-entropy bits over all records, then binning."""
    fps = fingerprint_matrix(records)
    bits = top_entropy_bits(fps, n_he)
    return lsh_assign(fps, bits, method=method, provenance={"n_he": n_he})
