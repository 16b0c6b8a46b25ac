"""Tests for weighted k-means and scene-level ensembling."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from ensemble.kmeans import weighted_cost, weighted_kmeans
from ensemble.scene import WorldSet, ensemble_scene, gather_inputs
from jointcast_core.errors import InputError, SceneValidationError
from metrics.forecasting import ScenarioForecast, multiworld_scene


def world_set(traj, scores, agent_ids=("a", "b"), scenario_id: str = "s") -> WorldSet:
    return WorldSet(scenario_id, list(agent_ids), np.asarray(traj), np.asarray(scores))


def best_partition_cost(points: np.ndarray, weights: np.ndarray, k: int) -> float:
    """Smallest weighted cost over every assignment with no empty cluster."""
    best = np.inf
    for labels in itertools.product(range(k), repeat=points.shape[0]):
        labels = np.array(labels)
        if len(set(labels.tolist())) < k:
            continue
        centroids = np.stack(
            [
                np.average(points[labels == c], axis=0, weights=weights[labels == c])
                for c in range(k)
            ]
        )
        best = min(best, weighted_cost(points, weights, labels, centroids))
    return best


# --- Weighted k-means ---


class TestWeightedKMeans:
    def test_symmetric_clusters(self):
        points = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        result = weighted_kmeans(points, np.ones(4), k=2, seed=0)
        centroids = sorted(map(tuple, result.centroids))
        assert centroids == [(0.0, 0.5), (10.0, 0.5)]
        assert result.assignments[0] == result.assignments[1]
        assert result.assignments[2] == result.assignments[3]

    def test_single_cluster_weighted_mean(self):
        result = weighted_kmeans(np.array([[0.0], [1.0]]), np.array([3.0, 1.0]), k=1)
        np.testing.assert_allclose(result.centroids, [[0.25]])

    @pytest.mark.parametrize("seed", range(5))
    def test_cost_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.standard_normal((20, 4))
        result = weighted_kmeans(points, rng.uniform(0.1, 2.0, 20), k=4, seed=seed)
        assert all(b <= a + 1e-12 for a, b in zip(result.cost_history, result.cost_history[1:]))

    @pytest.mark.parametrize("seed", range(5))
    def test_near_best_partition_on_tiny_input(self, seed):
        rng = np.random.default_rng(100 + seed)
        points = rng.standard_normal((7, 2))
        weights = rng.uniform(0.5, 2.0, 7)
        result = weighted_kmeans(points, weights, k=2, seed=seed)
        final = weighted_cost(points, weights, result.assignments, result.centroids)
        assert final >= best_partition_cost(points, weights, 2) - 1e-9
        assert final == pytest.approx(result.cost, rel=1e-12)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(9)
        points, weights = rng.standard_normal((30, 3)), rng.uniform(0.1, 1.0, 30)
        first = weighted_kmeans(points, weights, k=5, seed=4)
        second = weighted_kmeans(points, weights, k=5, seed=4)
        np.testing.assert_array_equal(first.assignments, second.assignments)
        np.testing.assert_array_equal(first.centroids, second.centroids)

    def test_identical_points_fill_every_cluster(self):
        result = weighted_kmeans(np.ones((6, 2)), np.ones(6), k=3)
        assert set(result.assignments.tolist()) == {0, 1, 2}
        np.testing.assert_array_equal(result.centroids, np.ones((3, 2)))

    @pytest.mark.parametrize(
        "n, k, iters, weight",
        [(2, 3, 10, 1.0), (4, 2, 0, 1.0), (4, 2, 10, 0.0)],
    )
    def test_invalid_inputs(self, n, k, iters, weight):
        with pytest.raises(InputError):
            weighted_kmeans(np.zeros((n, 2)), np.full(n, weight), k=k, iters=iters)


# --- Gathering ---


class TestGatherInputs:
    def test_reorders_agents(self):
        first = world_set(np.zeros((2, 2, 3, 2)), [0.5, 0.5])
        traj = np.zeros((2, 2, 3, 2))
        traj[:, 0] = 1.0
        second = world_set(traj, [0.4, 0.6], agent_ids=("b", "a"))
        merged = gather_inputs([first, second])
        assert merged.num_worlds == 4
        np.testing.assert_array_equal(merged.traj[2:, 1], 1.0)
        np.testing.assert_array_equal(merged.traj[2:, 0], 0.0)

    def test_mismatched_agents(self):
        first = world_set(np.zeros((1, 2, 3, 2)), [1.0])
        other = world_set(np.zeros((1, 2, 3, 2)), [1.0], agent_ids=("a", "c"))
        with pytest.raises(SceneValidationError):
            gather_inputs([first, other])

    def test_mismatched_scenarios(self):
        first = world_set(np.zeros((1, 2, 3, 2)), [1.0])
        other = world_set(np.zeros((1, 2, 3, 2)), [1.0], scenario_id="t")
        with pytest.raises(SceneValidationError):
            gather_inputs([first, other])

    def test_mismatched_horizon(self):
        first = world_set(np.zeros((1, 2, 3, 2)), [1.0])
        other = world_set(np.zeros((1, 2, 4, 2)), [1.0])
        with pytest.raises(SceneValidationError):
            gather_inputs([first, other])

    def test_nothing_to_gather(self):
        with pytest.raises(InputError):
            gather_inputs([])


# --- Scene ensembling ---


class TestEnsembleScene:
    def test_identical_predictions(self):
        traj = np.random.default_rng(0).standard_normal((1, 2, 5, 2))
        inputs = world_set(np.repeat(traj, 6, axis=0), np.full(6, 1.0 / 6.0))
        out = ensemble_scene(inputs, k=3)
        for world in out.traj:
            np.testing.assert_allclose(world, traj[0], atol=1e-12)
        assert out.scores.sum() == pytest.approx(1.0)

    def test_forty_eight_worlds_to_six(self):
        rng = np.random.default_rng(1)
        members = [
            world_set(rng.normal(0, 5, (6, 2, 4, 2)), rng.dirichlet(np.ones(6)))
            for _ in range(8)
        ]
        inputs = gather_inputs(members)
        assert inputs.num_worlds == 48
        out = ensemble_scene(inputs, k=6, seed=3)
        assert out.traj.shape == (6, 2, 4, 2)
        assert out.scores.sum() == pytest.approx(1.0, abs=1e-12)
        assert out.agent_ids == ["a", "b"]

    def test_committee_beats_median_member(self):
        rng = np.random.default_rng(5)
        gt = rng.normal(0.0, 10.0, (2, 4, 2))
        angles = np.pi * np.arange(6) / 3.0
        bundles = 25.0 * np.stack([np.cos(angles), np.sin(angles)], axis=-1) - (22.0, 0.0)
        members, pis = [], []
        for m in range(8):
            offsets = bundles[:, None, None, :] + rng.normal(0.0, 0.5, (6, 2, 4, 2))
            pi = np.full(6, 1.0 / 6.0)
            if m == 0:
                offsets[0] = 0.0
                pi = np.array([0.5, 0.1, 0.1, 0.1, 0.1, 0.1])
            members.append(gt[None] + offsets)
            pis.append(pi)
        weights = [3.0] + [1.0] * 7

        def fde(traj, pi) -> float:
            return multiworld_scene(ScenarioForecast("s", traj, pi, gt))["avgMinFDE"]

        median = float(np.median([fde(traj, pi) for traj, pi in zip(members, pis)]))
        inputs = gather_inputs(
            [world_set(traj, pi * w) for traj, pi, w in zip(members, pis, weights)]
        )
        assert inputs.num_worlds == 48
        out = ensemble_scene(inputs, k=6, seed=0)
        assert fde(out.traj, out.scores) <= 0.9 * median

    def test_separated_bundles_average_by_weight(self):
        rng = np.random.default_rng(2)
        left = rng.normal(0.0, 0.1, (3, 2, 4, 2))
        right = rng.normal(50.0, 0.1, (2, 2, 4, 2))
        weights = np.array([0.1, 0.2, 0.3, 0.15, 0.25])
        out = ensemble_scene(world_set(np.concatenate([left, right]), weights), k=2)
        order = np.argsort(out.traj[:, 0, -1, 0])
        np.testing.assert_allclose(
            out.traj[order[0]], np.average(left, axis=0, weights=weights[:3]), atol=1e-12
        )
        np.testing.assert_allclose(
            out.traj[order[1]], np.average(right, axis=0, weights=weights[3:]), atol=1e-12
        )
        np.testing.assert_allclose(out.scores[order], [0.6, 0.4])

    def test_plain_mean_variant(self):
        traj = np.stack([np.zeros((1, 2, 2)), np.ones((1, 2, 2))])
        out = ensemble_scene(
            world_set(traj, [0.9, 0.1], agent_ids=("a",)), k=1, weighted_average=False
        )
        np.testing.assert_allclose(out.traj[0], np.full((1, 2, 2), 0.5))
        np.testing.assert_allclose(out.scores, [1.0])

    def test_too_few_worlds(self):
        with pytest.raises(InputError):
            ensemble_scene(world_set(np.zeros((2, 2, 3, 2)), [0.5, 0.5]), k=6)

    def test_non_positive_score(self):
        with pytest.raises(InputError):
            ensemble_scene(world_set(np.zeros((3, 2, 3, 2)), [0.5, 0.5, 0.0]), k=2)
