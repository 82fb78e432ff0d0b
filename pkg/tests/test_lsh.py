from __future__ import annotations

import numpy as np
import pytest

from fedmol.dataset import ClientShard, MoleculeRecord
from fedmol.federation import ProtocolError
from fedmol.lsh import (
    bit_entropies, centralized_lsh, fed_lsh, intersect_bits, lsh_assign,
    local_top_entropy_bits, top_entropy_bits,
)

from oracles import oracle_entropy, oracle_lsh, partitions_equal


def shard_from_matrix(fps: np.ndarray, client_id: int = 0) -> ClientShard:
    records = tuple(
        MoleculeRecord(f"c{client_id}m{i:04d}", fp.astype(np.uint8), f"S{i % 3}", {"g": "v"})
        for i, fp in enumerate(fps)
    )
    return ClientShard(client_id=client_id, records=records)


def matrix_with_column_counts(counts: dict[int, int], n_rows: int, n_bits: int) -> np.ndarray:
    """Rows such that column p has exactly counts[p] ones (deterministic layout)."""
    fps = np.zeros((n_rows, n_bits), dtype=np.uint8)
    for col, ones in counts.items():
        fps[:ones, col] = 1
    return fps


class TestEntropy:
    def test_half_frequency_is_one_bit(self):
        fps = matrix_with_column_counts({0: 5}, 10, 4)
        assert bit_entropies(fps)[0] == pytest.approx(1.0, abs=1e-12)

    def test_constant_bits_are_zero(self):
        fps = np.ones((6, 3), dtype=np.uint8)
        assert np.allclose(bit_entropies(fps), 0.0)

    def test_symmetric_in_q(self):
        for ones in range(0, 21):
            a = bit_entropies(matrix_with_column_counts({0: ones}, 20, 1))[0]
            b = bit_entropies(matrix_with_column_counts({0: 20 - ones}, 20, 1))[0]
            assert a == pytest.approx(b, abs=1e-12)
            assert a == pytest.approx(oracle_entropy(ones / 20), abs=1e-12)


class TestTopBits:
    def test_single_informative_bit(self):
        fps = matrix_with_column_counts({0: 5}, 10, 8)
        fps[:, 1:] = 0
        fps[:, 3] = 1  # constant
        shard = shard_from_matrix(fps)
        assert local_top_entropy_bits(shard, 1) == (0,)

    def test_all_constant_returns_lowest_indices(self):
        fps = np.zeros((5, 8), dtype=np.uint8)
        assert top_entropy_bits(fps, 3) == (0, 1, 2)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            top_entropy_bits(np.zeros((3, 4), dtype=np.uint8), 5)


class TestLshAssign:
    def test_identical_fingerprints_share_a_bin(self):
        fps = np.tile(np.array([1, 0, 1, 0], dtype=np.uint8), (3, 1))
        assignment = lsh_assign(fps, [0, 2])
        assert assignment.labels.tolist() == [0, 0, 0]

    def test_differences_outside_selected_bits_are_invisible(self):
        fps = np.array([[1, 0, 1, 0], [1, 1, 1, 1]], dtype=np.uint8)
        assignment = lsh_assign(fps, [0, 2])
        assert assignment.labels.tolist() == [0, 0]

    def test_one_informative_bit_gives_two_bins(self):
        fps = matrix_with_column_counts({1: 3}, 6, 4)
        assignment = lsh_assign(fps, [1])
        assert assignment.n_clusters == 2

    def test_labels_follow_first_occurrence(self):
        fps = np.array([[0, 1], [1, 0], [0, 1], [1, 1]], dtype=np.uint8)
        assignment = lsh_assign(fps, [0, 1])
        assert assignment.labels.tolist() == [0, 1, 0, 2]

    def test_cluster_count_bound(self):
        rng = np.random.default_rng(0)
        fps = (rng.random((40, 16)) < 0.5).astype(np.uint8)
        bits = (1, 4, 9)
        assignment = lsh_assign(fps, bits)
        assert assignment.n_clusters <= min(len(fps), 2 ** len(bits))

    def test_record_order_invariance_up_to_relabeling(self):
        rng = np.random.default_rng(1)
        fps = (rng.random((30, 12)) < 0.4).astype(np.uint8)
        order = rng.permutation(30)
        a = lsh_assign(fps, [2, 5, 7]).labels
        b = lsh_assign(fps[order], [2, 5, 7]).labels
        assert partitions_equal(a[order].tolist(), b.tolist())


class TestIntersectAndDoubling:
    def test_plain_intersection(self):
        assert intersect_bits([(1, 2, 3), (2, 3, 4), (0, 2, 3)]) == (2, 3)

    def test_identical_shards_intersect_to_common_top_set(self):
        rng = np.random.default_rng(2)
        fps = (rng.random((20, 16)) < 0.4).astype(np.uint8)
        shards = [shard_from_matrix(fps.copy(), client_id=c) for c in range(3)]
        bits, assignments = fed_lsh(shards, n_he=5)
        assert bits == local_top_entropy_bits(shards[0], 5)
        assert len(bits) == 5

    def test_doubling_until_overlap(self):
        # client 0 ranks bits (1,2) on top, client 1 ranks (3,4); doubled
        # top-4 sets agree on {1,2,3,4}
        a = matrix_with_column_counts({1: 10, 2: 9, 3: 6, 4: 5}, 20, 8)
        b = matrix_with_column_counts({3: 10, 4: 9, 1: 6, 2: 5}, 20, 8)
        shards = [shard_from_matrix(a, 0), shard_from_matrix(b, 1)]
        assert local_top_entropy_bits(shards[0], 2) == (1, 2)
        assert local_top_entropy_bits(shards[1], 2) == (3, 4)
        bits, _ = fed_lsh(shards, n_he=2)
        assert bits == (1, 2, 3, 4)

    def test_single_client_returns_its_own_top_set(self):
        rng = np.random.default_rng(3)
        fps = (rng.random((15, 10)) < 0.5).astype(np.uint8)
        shard = shard_from_matrix(fps)
        bits, assignments = fed_lsh([shard], n_he=4)
        assert bits == local_top_entropy_bits(shard, 4)

    def test_exhausted_doublings_raise_protocol_error(self):
        a = matrix_with_column_counts({0: 10, 1: 9, 2: 8, 3: 7}, 20, 64)
        b = matrix_with_column_counts({32: 10, 33: 9, 34: 8, 35: 7}, 20, 64)
        shards = [shard_from_matrix(a, 0), shard_from_matrix(b, 1)]
        with pytest.raises(ProtocolError, match="doublings"):
            fed_lsh(shards, n_he=1, max_doublings=2)


class TestFederatedVsCentralized:
    def test_single_client_equals_centralized_partition(self):
        rng = np.random.default_rng(4)
        for trial in range(15):
            fps = (rng.random((25, 12)) < rng.uniform(0.2, 0.6)).astype(np.uint8)
            shard = shard_from_matrix(fps)
            n_he = int(rng.integers(1, 8))
            _, federated = fed_lsh([shard], n_he=n_he)
            centralized = centralized_lsh(shard.records, n_he)
            assert np.array_equal(federated[0].labels, centralized.labels)

    def test_identical_shards_on_every_client_match_centralized(self):
        rng = np.random.default_rng(5)
        fps = (rng.random((30, 16)) < 0.4).astype(np.uint8)
        shards = [shard_from_matrix(fps.copy(), client_id=c) for c in range(4)]
        _, federated = fed_lsh(shards, n_he=6)
        centralized = centralized_lsh(shards[0].records, 6)
        for assignment in federated:
            assert partitions_equal(assignment.labels.tolist(), centralized.labels.tolist())

    def test_centralized_matches_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            fps = (rng.random((18, 10)) < rng.uniform(0.2, 0.7)).astype(np.uint8)
            n_he = int(rng.integers(1, 6))
            bits, labels = oracle_lsh(fps, n_he)
            assignment = lsh_assign(fps, top_entropy_bits(fps, n_he))
            assert list(top_entropy_bits(fps, n_he)) == bits
            assert partitions_equal(assignment.labels.tolist(), labels)

    def test_deterministic(self, blob_shards):
        a_bits, a_assignments = fed_lsh(blob_shards, 32, seed=1)
        b_bits, b_assignments = fed_lsh(blob_shards, 32, seed=1)
        assert a_bits == b_bits
        for a, b in zip(a_assignments, b_assignments):
            assert np.array_equal(a.labels, b.labels)
