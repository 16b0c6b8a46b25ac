"""
Decoder Stages

ProposalModule: anchor-free joint proposals emitted recurrently, one chunk
of future steps per recurrence. RefinementModule: anchor-based single-shot
offsets on top of the detached proposals. Both work in each agent's
current local frame.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from core_math import ops
from core_math.layers import MLP, Module
from core_math.params import ParameterStore
from core_math.tensor import Tensor
from decoder.attention import DecoderRelations, ModeAttentionStack
from encoder.scene_encoder import SceneEncoding
from jointcast_core.config import RunConfig
from jointcast_core.errors import NumericError

logger = logging.getLogger(__name__)

SCALE_FLOOR = 1e-3


@dataclass
class StageOutput:
    """Per-stage decoder output over all agents, in agent-current frames."""

    traj: Tensor  # [K, A, T', 2]
    scales: Tensor  # [K, A, T', 2]
    mode_emb: Tensor  # [K, A, D]


def positive_scale(raw: Tensor) -> Tensor:
    return ops.add(ops.softplus(raw), SCALE_FLOOR)


def _check_finite(x: Tensor, stage: str) -> None:
    if not np.all(np.isfinite(x.data)):
        raise NumericError("Non-finite decoder state", stage=stage)


class ProposalModule(Module):
    """
    Recurrent anchor-free proposal.

    K learned seeds are repeated across the A agents. Each recurrence runs
    the shared attention stack and emits chunk_steps displacements per
    mode-agent; their running sum, continued from the previous chunk's last
    position, gives the proposed positions.
    """

    def __init__(
        self, store: ParameterStore, cfg: RunConfig, name: str = "decoder.propose"
    ) -> None:
        super().__init__(store, name)
        self.cfg = cfg
        dim, chunk = cfg.hidden_dim, cfg.chunk_steps
        self.seeds = self.param("mode_seeds", (cfg.num_modes, dim), init="normal")
        self.stack = self.child(ModeAttentionStack(store, cfg, f"{name}.stack"))
        self.loc_head = self.child(
            MLP(store, f"{name}.loc_head", dim, [dim, chunk * 2], cfg.activation)
        )
        self.scale_head = self.child(
            MLP(store, f"{name}.scale_head", dim, [dim, chunk * 2], cfg.activation)
        )

    def __call__(self, enc: SceneEncoding, relations: DecoderRelations) -> StageOutput:
        cfg = self.cfg
        modes, agents, chunk = cfg.num_modes, enc.frames.num_agents, cfg.chunk_steps
        x = ops.broadcast_to(
            ops.reshape(self.seeds, (modes, 1, cfg.hidden_dim)), (modes, agents, cfg.hidden_dim)
        )
        rel_pe = self.stack.embed_relations(relations)

        positions: list[Tensor] = []
        scales: list[Tensor] = []
        last = self.const(np.zeros((modes, agents, 1, 2)))
        for step in range(cfg.recurrent_steps):
            x = self.stack(x, enc, relations, rel_pe)
            _check_finite(x, f"propose.recurrent_step_{step + 1}")
            displacement = ops.reshape(self.loc_head(x), (modes, agents, chunk, 2))
            chunk_positions = ops.add(ops.cumsum(displacement, axis=2), last)
            last = ops.index(chunk_positions, (slice(None), slice(None), slice(-1, None)))
            positions.append(chunk_positions)
            scales.append(
                positive_scale(ops.reshape(self.scale_head(x), (modes, agents, chunk, 2)))
            )
        logger.debug(f"Proposed {modes} modes for {agents} agents in {cfg.recurrent_steps} chunks")
        return StageOutput(
            traj=ops.concat(positions, axis=2),
            scales=ops.concat(scales, axis=2),
            mode_emb=x,
        )


def anchor_displacements(anchors: np.ndarray) -> np.ndarray:
    """Per-step displacements of [K, A, T', 2] anchors, starting from the frame origin."""
    previous = np.concatenate([np.zeros_like(anchors[:, :, :1]), anchors[:, :, :-1]], axis=2)
    return anchors - previous


class RefinementModule(Module):
    """
    Anchor-based refinement.

    Anchors are the proposals with their gradient severed. The initial
    embedding of every mode-agent is an MLP over the anchor's displacement
    sequence; proposal embeddings are not consumed.
    """

    def __init__(
        self, store: ParameterStore, cfg: RunConfig, name: str = "decoder.refine"
    ) -> None:
        super().__init__(store, name)
        self.cfg = cfg
        dim, horizon = cfg.hidden_dim, cfg.future_steps
        self.anchor_embed = self.child(
            MLP(store, f"{name}.anchor_embed", horizon * 2, [dim, dim], cfg.activation)
        )
        self.stack = self.child(ModeAttentionStack(store, cfg, f"{name}.stack"))
        self.offset_head = self.child(
            MLP(store, f"{name}.offset_head", dim, [dim, horizon * 2], cfg.activation)
        )
        self.scale_head = self.child(
            MLP(store, f"{name}.scale_head", dim, [dim, horizon * 2], cfg.activation)
        )

    def __call__(
        self, enc: SceneEncoding, relations: DecoderRelations, proposal: StageOutput
    ) -> StageOutput:
        anchors = proposal.traj.detach()
        modes, agents, horizon, _ = anchors.shape
        steps = anchor_displacements(anchors.data).reshape(modes, agents, horizon * 2)
        x = self.anchor_embed(self.const(steps))
        x = self.stack(x, enc, relations, self.stack.embed_relations(relations))
        _check_finite(x, "refine")
        offsets = ops.reshape(self.offset_head(x), (modes, agents, horizon, 2))
        scales = positive_scale(ops.reshape(self.scale_head(x), (modes, agents, horizon, 2)))
        return StageOutput(traj=ops.add(anchors, offsets), scales=scales, mode_emb=x)
