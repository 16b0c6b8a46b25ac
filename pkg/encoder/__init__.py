"""
Encoder

Query-centric scene encoder producing map encodings [M, D] and agent
encodings [A, T, D].
"""

from encoder.neighbors import neighbor_mask, polygon_distances
from encoder.scene_encoder import ATTENTION_FAMILIES, SceneEncoder, SceneEncoding

__all__ = [
    "ATTENTION_FAMILIES",
    "SceneEncoder",
    "SceneEncoding",
    "neighbor_mask",
    "polygon_distances",
]
