"""
Weighted K-Means

Lloyd iterations with weighted centroids and weight-proportional k-means++
seeding. Deterministic for a given seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from jointcast_core.errors import InputError

logger = logging.getLogger(__name__)


@dataclass
class KMeansResult:
    assignments: np.ndarray  # [N]
    centroids: np.ndarray  # [K, P]
    cost_history: list[float]
    iterations: int

    @property
    def cost(self) -> float:
        return self.cost_history[-1]


def weighted_cost(
    points: np.ndarray, weights: np.ndarray, assignments: np.ndarray, centroids: np.ndarray
) -> float:
    """Weighted within-cluster sum of squared distances."""
    residual = points - centroids[assignments]
    return float(np.sum(weights * np.sum(residual * residual, axis=-1)))


def assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest centroid per point; ties go to the lowest centroid index."""
    return np.argmin(cdist(points, centroids, "sqeuclidean"), axis=1)


def seed_centroids(
    points: np.ndarray, weights: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """
    k-means++ seeding with selection probability proportional to
    weight x squared distance to the nearest chosen centroid.
    """
    n = points.shape[0]
    chosen = [int(rng.choice(n, p=weights / weights.sum()))]
    for _ in range(1, k):
        nearest = cdist(points, points[chosen], "sqeuclidean").min(axis=1)
        mass = weights * nearest
        if mass.sum() <= 0.0:
            # every point coincides with a chosen centroid
            remaining = np.setdiff1d(np.arange(n), chosen)
            mass = np.zeros(n)
            mass[remaining] = weights[remaining]
        chosen.append(int(rng.choice(n, p=mass / mass.sum())))
    return points[chosen].copy()


def repair_empty(
    points: np.ndarray, assignments: np.ndarray, centroids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Re-seed empty clusters with the farthest point of a multi-member cluster.

    The moved point becomes the cluster's sole member and its centroid.
    """
    assignments = assignments.copy()
    centroids = centroids.copy()
    k = centroids.shape[0]
    for cluster in range(k):
        if np.any(assignments == cluster):
            continue
        counts = np.bincount(assignments, minlength=k)
        donors = counts[assignments] > 1
        distances = np.sum((points - centroids[assignments]) ** 2, axis=-1)
        farthest = int(np.argmax(np.where(donors, distances, -1.0)))
        logger.warning(
            f"Re-seeding empty cluster {cluster} with point {farthest} "
            f"from cluster {int(assignments[farthest])}"
        )
        assignments[farthest] = cluster
        centroids[cluster] = points[farthest]
    return assignments, centroids


def update_centroids(
    points: np.ndarray, weights: np.ndarray, assignments: np.ndarray, k: int
) -> np.ndarray:
    """Weight-weighted mean of each cluster's members."""
    one_hot = np.zeros((points.shape[0], k))
    one_hot[np.arange(points.shape[0]), assignments] = weights
    mass = one_hot.sum(axis=0)
    return (one_hot.T @ points) / mass[:, None]


def weighted_kmeans(
    points: np.ndarray,
    weights: np.ndarray,
    k: int,
    iters: int = 50,
    seed: int = 0,
) -> KMeansResult:
    """
    Cluster weighted points.

    Args:
        points: [N, P] features
        weights: [N] strictly positive sample weights
        k: Cluster count, at most N
        iters: Maximum Lloyd iterations, at least 1
        seed: Seed of the k-means++ draws

    Returns:
        KMeansResult; cost_history holds the weighted cost after the initial
        assignment and after every iteration, and never increases

    Raises:
        InputError: If N < k, iters < 1, or a weight is not positive
    """
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if points.ndim != 2 or weights.shape != (points.shape[0],):
        raise InputError(
            f"Expected points [N, P] and weights [N], got {points.shape} and {weights.shape}"
        )
    n = points.shape[0]
    if k < 1 or n < k:
        raise InputError(f"Cannot form {k} clusters from {n} points", points=n, clusters=k)
    if iters < 1:
        raise InputError("iters must be at least 1", iters=iters)
    if not np.all(weights > 0.0):
        raise InputError("Sample weights must be strictly positive")

    rng = np.random.default_rng(seed)
    centroids = seed_centroids(points, weights, k, rng)
    assignments, centroids = repair_empty(points, assign(points, centroids), centroids)
    history = [weighted_cost(points, weights, assignments, centroids)]

    iteration = 0
    for iteration in range(1, iters + 1):
        centroids = update_centroids(points, weights, assignments, k)
        updated, centroids = repair_empty(points, assign(points, centroids), centroids)
        history.append(weighted_cost(points, weights, updated, centroids))
        if np.array_equal(updated, assignments):
            break
        assignments = updated
    centroids = update_centroids(points, weights, assignments, k)
    final_cost = weighted_cost(points, weights, assignments, centroids)
    if final_cost < history[-1]:
        history.append(final_cost)
    logger.debug(f"Weighted k-means: {iteration} iterations, cost {history[-1]:.6g}")
    return KMeansResult(
        assignments=assignments, centroids=centroids, cost_history=history, iterations=iteration
    )
