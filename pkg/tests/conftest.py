from __future__ import annotations

import numpy as np
import pytest

from fedmol.dataset import SyntheticSpec, generate_synthetic
from fedmol.partitioner import PartitionConfig, soft_split

# desk-scale benchmark fixture: 20 scaffold blobs of 25 molecules in 64 bits
BLOB_SPEC = dict(
    n_scaffolds=20,
    molecules_per_scaffold=25,
    bits_per_scaffold_core=12,
    noise_bits=4,
    fingerprint_bits=64,
)


def make_blobs(seed: int = 7, name: str = "blobs", **overrides):
    spec = SyntheticSpec(seed=seed, name=name, **{**BLOB_SPEC, **overrides})
    return generate_synthetic(spec)


def make_blob_shards(seed: int = 7, n_clients: int = 5, **overrides):
    manifest, records = make_blobs(seed=seed, **overrides)
    shards = soft_split(records, PartitionConfig(n_clients=n_clients, seed=seed))
    return manifest, shards


@pytest.fixture(scope="session")
def blob_dataset():
    return make_blobs()


@pytest.fixture(scope="session")
def blob_shards():
    return make_blob_shards()[1]


def random_points(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return rng.normal(size=(n, d))
