"""
Attention Neighborhoods

Boolean attention masks from pairwise distances: keys within a radius,
falling back to the k nearest keys when the radius holds none. Ties at the
k-th distance are all included, so masks permute with their elements.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from scene_model.types import Scene


def neighbor_mask(distances: np.ndarray, radius: Optional[float], k: int) -> np.ndarray:
    """
    Select attended keys per query.

    Args:
        distances: [..., N] query-to-key distances; inf marks excluded keys
        radius: Keys closer than this are attended; None means k-NN only
        k: Fallback neighbor count

    Returns:
        Bool mask [..., N]; all false where no key is eligible
    """
    eligible = np.isfinite(distances)
    if distances.shape[-1] == 0:
        return eligible
    if radius is None:
        within = np.zeros_like(eligible)
    else:
        within = eligible & (distances < radius)
    count = min(k, distances.shape[-1])
    kth = np.sort(np.where(eligible, distances, np.inf), axis=-1)[..., count - 1]
    nearest = eligible & (distances <= kth[..., None])
    fallback = ~within.any(axis=-1, keepdims=True)
    return np.where(fallback, nearest, within)


def exclude_self(distances: np.ndarray) -> np.ndarray:
    """Copy of square [..., N, N] distances with the diagonal set to inf."""
    out = np.array(distances, dtype=np.float64)
    n = out.shape[-1]
    out[..., np.arange(n), np.arange(n)] = np.inf
    return out


def polygon_distances(points: np.ndarray, scene: Scene) -> np.ndarray:
    """
    Distance from each point to the nearest centerline point of each polygon.

    Args:
        points: [N, 2] world positions

    Returns:
        [N, M] distances
    """
    centerlines = [p.centerline for p in scene.polygons]
    starts = np.cumsum([0] + [c.shape[0] for c in centerlines[:-1]])
    queries = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    distances = cdist(queries, np.concatenate(centerlines))
    return np.minimum.reduceat(distances, starts, axis=1)
