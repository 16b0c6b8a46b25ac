"""
Scene Model

Scene data types, local spacetime frames, relative descriptors and their
embedding, the synthetic scene generator, and the JSON-lines scene format.
"""

from scene_model.embedding import DescriptorEmbedding, embed_descriptor
from scene_model.generator import generate_scenes, generate_synthetic_scene
from scene_model.geometry import (
    LocalFrame,
    RelDescriptor,
    SceneFrames,
    build_local_frames,
    permute_scene,
    rel_descriptor,
    rel_descriptors,
    transform_points,
    transform_scene,
    wrap_angle,
)
from scene_model.io import read_scenes, write_scenes
from scene_model.types import (
    STEP_SECONDS,
    AgentCategory,
    AgentTrack,
    MapPolygon,
    PolygonKind,
    Scene,
)

__all__ = [
    # Types
    "STEP_SECONDS",
    "AgentCategory",
    "AgentTrack",
    "MapPolygon",
    "PolygonKind",
    "Scene",
    # Geometry
    "LocalFrame",
    "RelDescriptor",
    "SceneFrames",
    "build_local_frames",
    "permute_scene",
    "rel_descriptor",
    "rel_descriptors",
    "transform_points",
    "transform_scene",
    "wrap_angle",
    # Embedding
    "DescriptorEmbedding",
    "embed_descriptor",
    # Generation and IO
    "generate_scenes",
    "generate_synthetic_scene",
    "read_scenes",
    "write_scenes",
]
