"""
Mode Attention Stack

The attention stack shared in structure by both decoder stages: L_dec
rounds of Mode2Time, Mode2Map and row-wise (across agents) attention,
followed by one column-wise attention across modes. Relations are taken
from each agent's current frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from core_math import ops
from core_math.layers import AttentionBlock, Module
from core_math.params import ParameterStore
from core_math.tensor import Tensor
from encoder.neighbors import exclude_self, neighbor_mask, polygon_distances
from encoder.scene_encoder import SceneEncoding
from jointcast_core.config import RunConfig
from scene_model.embedding import DescriptorEmbedding
from scene_model.geometry import rel_descriptors
from scene_model.types import Scene

RELATIONS = ("mode_time", "mode_map", "mode_agent")


@dataclass(frozen=True)
class DecoderRelations:
    """Descriptors and masks seen from each agent's current frame."""

    time_desc: np.ndarray  # [A, T, 4]
    time_mask: np.ndarray  # [A, T]
    map_desc: np.ndarray  # [A, M, 4]
    map_mask: np.ndarray  # [A, M]
    agent_desc: np.ndarray  # [A, A, 4]
    agent_mask: np.ndarray  # [A, A]


def decoder_relations(enc: SceneEncoding, scene: Scene, cfg: RunConfig) -> DecoderRelations:
    frames = enc.frames
    o, h, t = frames.current_origins, frames.current_headings, frames.current_times
    time_desc = rel_descriptors(
        o[:, None], h[:, None], t[:, None],
        frames.agent_origins, frames.agent_headings, frames.agent_times,
    )
    map_desc = rel_descriptors(
        o[:, None], h[:, None], t[:, None],
        frames.polygon_origins[None], frames.polygon_headings[None], t[:, None],
    )
    agent_desc = rel_descriptors(o[:, None], h[:, None], t[:, None], o[None], h[None], t[None])
    map_mask = neighbor_mask(polygon_distances(o, scene), cfg.map_radius, cfg.knn_fallback)
    agent_mask = np.isfinite(exclude_self(agent_desc[..., 0]))
    return DecoderRelations(
        time_desc=time_desc,
        time_mask=frames.agent_valid.copy(),
        map_desc=map_desc,
        map_mask=map_mask,
        agent_desc=agent_desc,
        agent_mask=agent_mask,
    )


class ModeAttentionStack(Module):
    """
    Attention over a [K, A, D] mode-agent tensor.

    Attributes:
        calls: Number of stack passes
    """

    def __init__(self, store: ParameterStore, cfg: RunConfig, name: str) -> None:
        super().__init__(store, name)
        dim, heads, act = cfg.hidden_dim, cfg.num_heads, cfg.activation
        self.num_layers = cfg.decoder_layers
        self.rel = {
            relation: self.child(
                DescriptorEmbedding(store, f"{name}.rel.{relation}", dim, cfg.num_freq_bands, act)
            )
            for relation in RELATIONS
        }
        self.layers: list[dict[str, AttentionBlock]] = []
        for i in range(cfg.decoder_layers):
            self.layers.append(
                {
                    relation: self.child(
                        AttentionBlock(
                            store,
                            f"{name}.{relation}.{i}",
                            dim,
                            heads,
                            dropout=cfg.dropout,
                            cross=relation != "mode_agent",
                        )
                    )
                    for relation in RELATIONS
                }
            )
        self.mode_mode = self.child(
            AttentionBlock(
                store, f"{name}.mode_mode", dim, heads, dropout=cfg.dropout, use_rel=False
            )
        )
        self.calls = 0

    def embed_relations(self, relations: DecoderRelations) -> dict[str, Tensor]:
        """Relative embeddings shaped to broadcast against [K, A, 1, D] queries."""
        time_pe = self.rel["mode_time"](relations.time_desc)
        map_pe = self.rel["mode_map"](relations.map_desc)
        return {
            "mode_time": ops.reshape(time_pe, (time_pe.shape[0], 1) + time_pe.shape[1:]),
            "mode_map": ops.reshape(map_pe, (map_pe.shape[0], 1) + map_pe.shape[1:]),
            "mode_agent": self.rel["mode_agent"](relations.agent_desc),
        }

    def __call__(
        self,
        x: Tensor,
        enc: SceneEncoding,
        relations: DecoderRelations,
        rel_pe: dict[str, Tensor],
    ) -> Tensor:
        """
        Args:
            x: Mode-agent embeddings [K, A, D]
            rel_pe: Output of embed_relations for the same relations
        """
        modes, agents, dim = x.shape
        time_mask = relations.time_mask[:, None, :]
        map_mask = relations.map_mask[:, None, :]
        for layer in self.layers:
            q = ops.reshape(x, (modes, agents, 1, dim))
            q = layer["mode_time"](q, kv=enc.agent_enc, rel_pe=rel_pe["mode_time"], mask=time_mask)
            q = layer["mode_map"](q, kv=enc.map_enc, rel_pe=rel_pe["mode_map"], mask=map_mask)
            x = ops.reshape(q, (modes, agents, dim))
            x = layer["mode_agent"](x, rel_pe=rel_pe["mode_agent"], mask=relations.agent_mask)
        columns = self.mode_mode(ops.swapaxes(x, 0, 1))
        self.calls += 1
        return ops.swapaxes(columns, 0, 1)
