"""
Scene Encoder

Query-centric factorized attention. Each polygon and each agent state is
embedded from features in its own local frame; relations between elements
enter every attention layer as embedded relative descriptors. The map is
refined by map-map attention, then each encoder block runs temporal,
agent-map and social attention in that order.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core_math import ops
from core_math.layers import MLP, AttentionBlock, Linear, Module
from core_math.params import ParameterStore
from core_math.tensor import Tensor
from encoder.features import (
    AGENT_FEATURES,
    POLYGON_KINDS,
    SEGMENT_FEATURES,
    agent_step_features,
    map_segment_features,
    polygon_kind_one_hot,
)
from encoder.neighbors import exclude_self, neighbor_mask, polygon_distances
from jointcast_core.config import RunConfig
from jointcast_core.errors import DimensionError, SceneValidationError
from scene_model.embedding import DescriptorEmbedding
from scene_model.geometry import SceneFrames, build_local_frames, rel_descriptors
from scene_model.types import Scene

logger = logging.getLogger(__name__)

ATTENTION_FAMILIES = ("map_map", "temporal", "agent_map", "social")


@dataclass
class SceneEncoding:
    """Encoder output plus the frames its relative embeddings were built from."""

    map_enc: Tensor  # [M, D]
    agent_enc: Tensor  # [A, T, D]
    frames: SceneFrames

    def __post_init__(self) -> None:
        m, a, t = self.frames.num_polygons, self.frames.num_agents, self.frames.num_steps
        if self.map_enc.shape[0] != m or self.agent_enc.shape[:2] != (a, t):
            raise DimensionError(
                f"Encodings {self.map_enc.shape}, {self.agent_enc.shape} do not match "
                f"M={m}, A={a}, T={t}",
                operand="encoding",
            )


def temporal_relations(frames: SceneFrames) -> tuple[np.ndarray, np.ndarray]:
    """Descriptors [A, T, T, 4] (query step, key step) and the causal validity mask."""
    o, h, t = frames.agent_origins, frames.agent_headings, frames.agent_times
    descriptors = rel_descriptors(
        o[:, :, None], h[:, :, None], t[:, :, None], o[:, None], h[:, None], t[:, None]
    )
    steps = frames.num_steps
    causal = np.tril(np.ones((steps, steps), dtype=bool))
    return descriptors, causal[None] & frames.agent_valid[:, None, :]


def agent_map_relations(
    frames: SceneFrames, scene: Scene, radius: float, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Descriptors [A, T, M, 4] from each agent state to each polygon, and the radius mask."""
    o, h, t = frames.agent_origins, frames.agent_headings, frames.agent_times
    descriptors = rel_descriptors(
        o[:, :, None],
        h[:, :, None],
        t[:, :, None],
        frames.polygon_origins[None, None],
        frames.polygon_headings[None, None],
        t[:, :, None],
    )
    distances = polygon_distances(o.reshape(-1, 2), scene)
    mask = neighbor_mask(distances, radius, k).reshape(o.shape[:2] + (frames.num_polygons,))
    return descriptors, mask


def social_relations(frames: SceneFrames, radius: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Descriptors [T, A, A, 4] among agents at the same step, and the radius mask."""
    o = np.swapaxes(frames.agent_origins, 0, 1)
    h = frames.agent_headings.T
    t = frames.agent_times.T
    valid = frames.agent_valid.T
    descriptors = rel_descriptors(
        o[:, :, None], h[:, :, None], t[:, :, None], o[:, None], h[:, None], t[:, None]
    )
    distances = exclude_self(descriptors[..., 0])
    distances = np.where(valid[:, None, :], distances, np.inf)
    return descriptors, neighbor_mask(distances, radius, k)


class SceneEncoder(Module):
    """
    Map and agent encoder.

    Attributes:
        calls: Attention rounds run per family since construction
    """

    def __init__(self, store: ParameterStore, cfg: RunConfig, name: str = "encoder") -> None:
        super().__init__(store, name)
        self.cfg = cfg
        dim, heads, act = cfg.hidden_dim, cfg.num_heads, cfg.activation
        bands = cfg.num_freq_bands

        self.segment_mlp = self.child(
            MLP(store, f"{name}.map.segment", SEGMENT_FEATURES, [dim, dim], act)
        )
        self.kind_embed = self.child(
            Linear(store, f"{name}.map.kind", len(POLYGON_KINDS), dim, bias=False)
        )
        self.agent_mlp = self.child(
            MLP(store, f"{name}.agent.input", AGENT_FEATURES, [dim, dim], act)
        )

        self.rel = {
            family: self.child(DescriptorEmbedding(store, f"{name}.rel.{family}", dim, bands, act))
            for family in ATTENTION_FAMILIES
        }
        self.blocks: dict[str, list[AttentionBlock]] = {}
        for family in ATTENTION_FAMILIES:
            self.blocks[family] = [
                self.child(
                    AttentionBlock(
                        store,
                        f"{name}.{family}.{i}",
                        dim,
                        heads,
                        dropout=cfg.dropout,
                        cross=family == "agent_map",
                    )
                )
                for i in range(cfg.encoder_layers)
            ]
        self.calls: Counter[str] = Counter()

    def encode_map(self, scene: Scene, frames: Optional[SceneFrames] = None) -> Tensor:
        """
        Encode polygons to [M, D].

        Raises:
            SceneValidationError: If the scene has no polygons
        """
        if scene.num_polygons == 0:
            raise SceneValidationError("Scene has no map polygons", scenario_id=scene.scenario_id)
        frames = frames or build_local_frames(scene)

        features, segment_mask = map_segment_features(scene, frames)
        weights = segment_mask / segment_mask.sum(axis=-1, keepdims=True)
        segments = self.segment_mlp(self.const(features))
        x = ops.sum(ops.mul(segments, self.const(weights[..., None])), axis=1)
        x = ops.add(x, self.kind_embed(self.const(polygon_kind_one_hot(scene))))

        o, h, t = frames.polygon_origins, frames.polygon_headings, frames.polygon_times
        descriptors = rel_descriptors(o[:, None], h[:, None], t[:, None], o[None], h[None], t[None])
        mask = neighbor_mask(exclude_self(descriptors[..., 0]), None, self.cfg.map_knn)
        rel_pe = self.rel["map_map"](descriptors)
        for block in self.blocks["map_map"]:
            x = block(x, rel_pe=rel_pe, mask=mask)
            self.calls["map_map"] += 1
        return x

    def encode_agents(
        self, scene: Scene, map_enc: Tensor, frames: Optional[SceneFrames] = None
    ) -> Tensor:
        """
        Encode agent histories to [A, T, D] given the scene's map encoding.

        Raises:
            DimensionError: If map_enc does not match the scene's polygons
        """
        dim = self.cfg.hidden_dim
        if map_enc.shape != (scene.num_polygons, dim):
            raise DimensionError(
                f"map_enc has shape {map_enc.shape}, expected ({scene.num_polygons}, {dim})",
                operand="map_enc",
            )
        frames = frames or build_local_frames(scene)
        cfg = self.cfg

        x = self.agent_mlp(self.const(agent_step_features(scene, frames)))

        temporal_desc, temporal_mask = temporal_relations(frames)
        map_desc, map_mask = agent_map_relations(frames, scene, cfg.map_radius, cfg.knn_fallback)
        social_desc, social_mask = social_relations(frames, cfg.social_radius, cfg.knn_fallback)
        temporal_pe = self.rel["temporal"](temporal_desc)
        map_pe = self.rel["agent_map"](map_desc)
        social_pe = self.rel["social"](social_desc)
        logger.debug(
            f"Encoding {scene.scenario_id}: "
            f"{int((~map_mask.any(-1)).sum())} agent states without map neighbors"
        )

        for i in range(cfg.encoder_layers):
            x = self.blocks["temporal"][i](x, rel_pe=temporal_pe, mask=temporal_mask)
            self.calls["temporal"] += 1
            x = self.blocks["agent_map"][i](x, kv=map_enc, rel_pe=map_pe, mask=map_mask)
            self.calls["agent_map"] += 1
            per_step = self.blocks["social"][i](
                ops.swapaxes(x, 0, 1), rel_pe=social_pe, mask=social_mask
            )
            x = ops.swapaxes(per_step, 0, 1)
            self.calls["social"] += 1
        return x

    def encode_scene(self, scene: Scene) -> SceneEncoding:
        frames = build_local_frames(scene)
        map_enc = self.encode_map(scene, frames)
        agent_enc = self.encode_agents(scene, map_enc, frames)
        return SceneEncoding(map_enc=map_enc, agent_enc=agent_enc, frames=frames)
