from __future__ import annotations

import numpy as np
import pytest

from fedmol.federation import FederationConfig, RoundMessage, run_federation
from fedmol.kmeans import (
    CentroidModel, KMeansProtocol, aggregate_centroids, centralized_kmeans,
    fed_kmeans, inertia, kmeanspp_init, local_kmeans_step,
)

from oracles import oracle_lloyd, partitions_equal


def msg(centroids, counts, client_id=0):
    return RoundMessage(client_id, (np.asarray(centroids, dtype=float), np.asarray(counts, dtype=np.int64)))


class TestKmeansppInit:
    def test_k_equals_n_is_permutation(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(8, 3))
        model = kmeanspp_init(points, 8, seed=1)
        found = {tuple(c) for c in model.centroids}
        assert found == {tuple(p) for p in points}

    def test_k_one_is_an_input_point(self):
        points = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        model = kmeanspp_init(points, 1, seed=5)
        assert any(np.array_equal(model.centroids[0], p) for p in points)

    def test_identical_points_k_one(self):
        points = np.ones((4, 2))
        model = kmeanspp_init(points, 1, seed=0)
        assert np.array_equal(model.centroids[0], np.ones(2))

    def test_counts_start_zero(self):
        model = kmeanspp_init(np.eye(3), 2, seed=0)
        assert np.array_equal(model.counts, np.zeros(2, dtype=np.int64))

    def test_k_larger_than_points_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            kmeanspp_init(np.eye(2), 3, seed=0)


class TestLocalStep:
    def test_single_point_single_cluster(self):
        model = CentroidModel(np.array([[10.0]]), np.array([0]))
        centroids, counts = local_kmeans_step(np.array([[4.0]]), model)
        assert centroids[0, 0] == 4.0
        assert counts[0] == 1

    def test_hand_assignment_on_the_line(self):
        model = CentroidModel(np.array([[0.0], [4.0]]), np.array([0, 0]))
        centroids, counts = local_kmeans_step(np.array([[1.0], [5.0]]), model)
        assert centroids[:, 0].tolist() == [1.0, 5.0]
        assert counts.tolist() == [1, 1]

    def test_empty_cluster_keeps_global_centroid(self):
        model = CentroidModel(np.array([[0.0], [4.0], [100.0]]), np.array([0, 0, 0]))
        centroids, counts = local_kmeans_step(np.array([[1.0], [5.0]]), model)
        assert centroids[2, 0] == 100.0
        assert counts[2] == 0

    def test_tie_goes_to_lowest_index(self):
        model = CentroidModel(np.array([[0.0], [2.0]]), np.array([0, 0]))
        centroids, counts = local_kmeans_step(np.array([[1.0]]), model)
        assert counts.tolist() == [1, 0]


class TestAggregate:
    def test_weighted_average(self):
        previous = CentroidModel(np.array([[9.0]]), np.array([0]))
        merged = aggregate_centroids(
            [msg([[0.0]], [1], 0), msg([[4.0]], [3], 1)], previous
        )
        assert merged.centroids[0, 0] == pytest.approx(3.0, abs=1e-15)
        assert merged.counts.tolist() == [4]

    def test_single_client_is_exact_identity(self):
        previous = CentroidModel(np.array([[9.0], [1.0]]), np.array([0, 0]))
        centroids = np.array([[0.1], [0.3]])
        merged = aggregate_centroids([msg(centroids, [3, 7])], previous)
        assert merged.centroids.tolist() == centroids.tolist()

    def test_all_zero_counts_keep_previous(self):
        previous = CentroidModel(np.array([[9.0]]), np.array([0]))
        merged = aggregate_centroids([msg([[1.0]], [0], 0), msg([[2.0]], [0], 1)], previous)
        assert merged.centroids[0, 0] == 9.0
        assert merged.counts.tolist() == [0]

    def test_inconsistent_k_rejected(self):
        previous = CentroidModel(np.array([[9.0]]), np.array([0]))
        with pytest.raises(ValueError, match="inconsistent k"):
            aggregate_centroids([msg([[1.0], [2.0]], [1, 1])], previous)

    def test_permutation_invariant_in_client_order(self):
        previous = CentroidModel(np.zeros((2, 2)), np.array([0, 0]))
        messages = [
            msg(np.arange(4.0).reshape(2, 2), [2, 5], 0),
            msg(np.arange(4.0, 8.0).reshape(2, 2), [1, 3], 1),
            msg(np.arange(8.0, 12.0).reshape(2, 2), [4, 0], 2),
        ]
        a = aggregate_centroids(messages, previous)
        b = aggregate_centroids(list(reversed(messages)), previous)
        assert np.array_equal(a.centroids, b.centroids)
        assert np.array_equal(a.counts, b.counts)


class TestFedKmeans:
    def test_single_client_equals_centralized_exactly(self):
        rng = np.random.default_rng(1)
        for trial in range(20):
            points = rng.normal(size=(rng.integers(5, 30), rng.integers(1, 5)))
            k = int(rng.integers(1, min(5, len(points)) + 1))
            rounds = int(rng.integers(1, 5))
            seed = int(rng.integers(0, 10_000))
            fed_model, fed_assignments = fed_kmeans([points], k, rounds, seed)
            cen_model, cen_assignment = centralized_kmeans(points, k, rounds, seed)
            assert np.array_equal(fed_model.centroids, cen_model.centroids)
            assert np.array_equal(fed_assignments[0].labels, cen_assignment.labels)

    def test_two_separated_blobs_recover_means(self):
        rng = np.random.default_rng(2)
        blob_a = rng.normal(size=(40, 2)) * 0.05 + np.array([0.0, 0.0])
        blob_b = rng.normal(size=(40, 2)) * 0.05 + np.array([10.0, 10.0])
        model, _ = fed_kmeans([blob_a, blob_b], k=2, rounds=5, seed=0)
        means = sorted((tuple(c) for c in model.centroids))
        expected = sorted([tuple(blob_a.mean(axis=0)), tuple(blob_b.mean(axis=0))])
        assert np.allclose(means, expected, atol=1e-6)

    def test_deterministic(self, blob_shards):
        a_model, a_assignments = fed_kmeans(blob_shards, 5, 3, seed=9)
        b_model, b_assignments = fed_kmeans(blob_shards, 5, 3, seed=9)
        assert np.array_equal(a_model.centroids, b_model.centroids)
        for a, b in zip(a_assignments, b_assignments):
            assert np.array_equal(a.labels, b.labels)

    def test_parallel_equals_serial(self, blob_shards):
        serial, _ = fed_kmeans(blob_shards, 5, 3, seed=4, parallel=False)
        threaded, _ = fed_kmeans(blob_shards, 5, 3, seed=4, parallel=True)
        assert np.array_equal(serial.centroids, threaded.centroids)

    def test_k_exceeding_total_points_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            fed_kmeans([np.zeros((2, 2)), np.ones((2, 2))], k=5, rounds=1, seed=0)

    def test_inertia_non_increasing_over_rounds(self):
        rng = np.random.default_rng(6)
        clients = [rng.normal(size=(30, 4)) for _ in range(3)]
        values = []
        for rounds in range(1, 7):
            model, _ = fed_kmeans(clients, k=4, rounds=rounds, seed=13)
            values.append(inertia(clients, model))
        for earlier, later in zip(values, values[1:]):
            assert later <= earlier + 1e-9

    def test_assignments_invariant_under_init_permutation(self):
        rng = np.random.default_rng(8)
        clients = [rng.normal(size=(25, 3)) for _ in range(2)]
        initial = kmeanspp_init(clients[0], 4, seed=2)
        permuted = CentroidModel(initial.centroids[::-1].copy(), initial.counts[::-1].copy())
        cfg = FederationConfig(n_clients=2, rounds=3, seed=2)
        base = run_federation(clients, KMeansProtocol(initial), cfg)
        swapped = run_federation(clients, KMeansProtocol(permuted), cfg)
        for a, b in zip(base.client_outputs, swapped.client_outputs):
            assert partitions_equal(a.tolist(), b.tolist())


class TestCentralizedKmeans:
    def test_k_one_gives_global_mean(self):
        rng = np.random.default_rng(3)
        points = rng.normal(size=(15, 2))
        model, _ = centralized_kmeans(points, 1, iterations=2, seed=0)
        assert np.allclose(model.centroids[0], points.mean(axis=0), atol=1e-12)

    def test_identical_points_zero_inertia(self):
        points = np.ones((6, 3))
        model, assignment = centralized_kmeans(points, 1, iterations=3, seed=1)
        assert inertia([points], model) == 0.0

    def test_matches_lloyd_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            points = rng.normal(size=(12, 2))
            k = int(rng.integers(1, 4))
            seed = int(rng.integers(0, 1000))
            iterations = int(rng.integers(1, 4))
            init = kmeanspp_init(points, k, seed)
            expected_centroids, expected_labels = oracle_lloyd(points, init.centroids, iterations)
            model, assignment = centralized_kmeans(points, k, iterations, seed)
            assert np.allclose(model.centroids, expected_centroids, atol=1e-10)
            assert partitions_equal(assignment.labels.tolist(), list(expected_labels))
