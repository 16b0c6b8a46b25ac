"""
Ensemble

Scene-level ensembling of joint predictions by weighted k-means over
joint endpoints.
"""

from ensemble.kmeans import KMeansResult, weighted_cost, weighted_kmeans
from ensemble.scene import EnsembleInput, WorldSet, ensemble_scene, gather_inputs

__all__ = [
    "EnsembleInput",
    "KMeansResult",
    "WorldSet",
    "ensemble_scene",
    "gather_inputs",
    "weighted_cost",
    "weighted_kmeans",
]
