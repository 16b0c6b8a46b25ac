"""
Joint Decoder

Composes proposal and refinement over the mode-agent tensor and maps the
target agents' trajectories back to world coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from core_math import ops
from core_math.layers import Module
from core_math.params import ParameterStore
from core_math.tensor import Tensor
from decoder.attention import DecoderRelations, decoder_relations
from decoder.stages import ProposalModule, RefinementModule, StageOutput
from encoder.scene_encoder import SceneEncoding
from jointcast_core.config import RunConfig
from jointcast_core.errors import NumericError, SceneValidationError
from scene_model.geometry import SceneFrames
from scene_model.types import Scene

PI_TOLERANCE = 1e-6


def local_to_world(local: np.ndarray, origins: np.ndarray, headings: np.ndarray) -> np.ndarray:
    """
    Map [K, A, T', 2] positions from per-agent frames to world coordinates.

    Args:
        origins: [A, 2] frame origins
        headings: [A] frame headings
    """
    c, s = np.cos(headings), np.sin(headings)
    rotation = np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)
    return np.einsum("aij,katj->kati", rotation, local) + origins[None, :, None, :]


@dataclass
class JointPrediction:
    """
    K joint worlds for the target agents of one scene.

    Trajectories are world-frame; scales are axis-aligned in each target's
    current frame. pi is uniform until scoring fills it.
    """

    scenario_id: str
    agent_ids: list[str]
    proposal_traj: np.ndarray  # [K, A', T', 2]
    refined_traj: np.ndarray  # [K, A', T', 2]
    scales: np.ndarray  # [K, A', T', 2]
    mode_emb: np.ndarray  # [K, A', D]
    pi: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        modes = self.refined_traj.shape[0]
        if self.pi.size == 0:
            self.pi = np.full(modes, 1.0 / modes)
        if np.any(self.scales <= 0.0):
            raise NumericError("Scales must be strictly positive", scenario_id=self.scenario_id)
        if self.pi.shape != (modes,):
            raise SceneValidationError(
                f"pi has shape {self.pi.shape}, expected ({modes},)", scenario_id=self.scenario_id
            )
        if abs(float(self.pi.sum()) - 1.0) > PI_TOLERANCE:
            raise SceneValidationError(
                f"pi sums to {float(self.pi.sum())}", scenario_id=self.scenario_id
            )

    @property
    def num_modes(self) -> int:
        return int(self.refined_traj.shape[0])

    def with_scores(self, pi: np.ndarray) -> "JointPrediction":
        return replace(self, pi=np.asarray(pi, dtype=np.float64))


@dataclass
class DecoderOutput:
    """Both decoder stages over all agents, plus the target selection."""

    proposal: StageOutput
    refinement: StageOutput
    target_indices: np.ndarray

    def _targets(self, x: Tensor) -> Tensor:
        return ops.index(x, (slice(None), self.target_indices))

    @property
    def proposal_traj(self) -> Tensor:
        return self._targets(self.proposal.traj)

    @property
    def proposal_scales(self) -> Tensor:
        return self._targets(self.proposal.scales)

    @property
    def refined_traj(self) -> Tensor:
        return self._targets(self.refinement.traj)

    @property
    def refined_scales(self) -> Tensor:
        return self._targets(self.refinement.scales)

    @property
    def mode_emb(self) -> Tensor:
        """Post-refinement target embeddings [K, A', D]."""
        return self._targets(self.refinement.mode_emb)

    def to_prediction(
        self, scene: Scene, frames: SceneFrames, pi: Optional[np.ndarray] = None
    ) -> JointPrediction:
        idx = self.target_indices
        origins = frames.current_origins[idx]
        headings = frames.current_headings[idx]
        return JointPrediction(
            scenario_id=scene.scenario_id,
            agent_ids=scene.target_ids,
            proposal_traj=local_to_world(
                self.proposal.traj.data[:, idx].astype(np.float64), origins, headings
            ),
            refined_traj=local_to_world(
                self.refinement.traj.data[:, idx].astype(np.float64), origins, headings
            ),
            scales=self.refinement.scales.data[:, idx].astype(np.float64),
            mode_emb=self.refinement.mode_emb.data[:, idx].astype(np.float64),
            pi=np.zeros(0) if pi is None else np.asarray(pi, dtype=np.float64),
        )


class JointDecoder(Module):
    """Multi-agent joint decoder: recurrent proposal then anchor-based refinement."""

    def __init__(self, store: ParameterStore, cfg: RunConfig, name: str = "decoder") -> None:
        super().__init__(store, name)
        self.cfg = cfg
        self.proposal = self.child(ProposalModule(store, cfg, f"{name}.propose"))
        self.refinement = self.child(RefinementModule(store, cfg, f"{name}.refine"))

    def relations(self, enc: SceneEncoding, scene: Scene) -> DecoderRelations:
        return decoder_relations(enc, scene, self.cfg)

    def propose(
        self, enc: SceneEncoding, scene: Scene, relations: Optional[DecoderRelations] = None
    ) -> StageOutput:
        return self.proposal(enc, relations or self.relations(enc, scene))

    def refine(
        self,
        enc: SceneEncoding,
        scene: Scene,
        proposal: StageOutput,
        relations: Optional[DecoderRelations] = None,
    ) -> StageOutput:
        return self.refinement(enc, relations or self.relations(enc, scene), proposal)

    def forward(self, enc: SceneEncoding, scene: Scene) -> DecoderOutput:
        relations = self.relations(enc, scene)
        proposal = self.propose(enc, scene, relations)
        refinement = self.refine(enc, scene, proposal, relations)
        return DecoderOutput(proposal, refinement, scene.target_indices)

    def decode(self, enc: SceneEncoding, scene: Scene) -> JointPrediction:
        """Decode to world-frame joint worlds with uniform pi."""
        return self.forward(enc, scene).to_prediction(scene, enc.frames)
