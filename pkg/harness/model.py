"""
Joint Forecaster

Bundles encoder, decoder and scorer over one ParameterStore and exposes
the three passes the harness needs: a differentiable forward pass, the
scene loss, and gradient-free prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from core_math.checkpoint import load_checkpoint, save_checkpoint
from core_math.params import ParameterStore
from core_math.tensor import no_grad
from decoder.joint import DecoderOutput, JointDecoder, JointPrediction
from encoder.scene_encoder import SceneEncoder, SceneEncoding
from jointcast_core.config import RunConfig
from jointcast_core.errors import DimensionError
from objective.losses import LossBreakdown, total_loss
from scene_model.geometry import to_local
from scene_model.types import Scene
from scoring.scorer import SceneScorer, SceneScores


@dataclass
class ForwardPass:
    """Everything one scene produces on its way to the loss."""

    encoding: SceneEncoding
    output: DecoderOutput
    scores: SceneScores


def local_targets(scene: Scene, encoding: SceneEncoding) -> np.ndarray:
    """Ground-truth futures [A', T', 2] in each target's current frame."""
    idx = scene.target_indices
    frames = encoding.frames
    return to_local(
        scene.target_futures(),
        frames.current_origins[idx][:, None, :],
        frames.current_headings[idx][:, None],
    )


class JointForecaster:
    """
    The full model: scene encoder, joint decoder and scene scorer.

    Attributes:
        cfg: Run configuration the parameter layout was built from
        store: Parameters and optimizer state shared by all components
    """

    def __init__(self, cfg: RunConfig, store: Optional[ParameterStore] = None) -> None:
        self.cfg = cfg
        self.store = store or ParameterStore(rng_seed=cfg.model_seed, dtype=cfg.dtype)
        self.encoder = SceneEncoder(self.store, cfg)
        self.decoder = JointDecoder(self.store, cfg)
        self.scorer = SceneScorer(self.store, cfg)

    @classmethod
    def from_checkpoint(cls, cfg: RunConfig, path: str | Path) -> "JointForecaster":
        """
        Build the configured layout and load its state.

        Raises:
            CheckpointError: If the checkpoint does not fit the configuration
        """
        model = cls(cfg)
        load_checkpoint(model.store, path)
        return model

    def save(self, path: str | Path) -> Path:
        return save_checkpoint(self.store, path)

    def train(self, mode: bool = True) -> "JointForecaster":
        for module in (self.encoder, self.decoder, self.scorer):
            module.train(mode)
        return self

    def eval(self) -> "JointForecaster":
        return self.train(False)

    def _check_scene(self, scene: Scene) -> None:
        if scene.history_steps != self.cfg.history_steps:
            raise DimensionError(
                f"Scene has {scene.history_steps} observed steps, model expects "
                f"{self.cfg.history_steps}",
                operand="scene",
                scenario_id=scene.scenario_id,
            )
        if scene.horizon != self.cfg.future_steps:
            raise DimensionError(
                f"Scene horizon is {scene.horizon}, model emits {self.cfg.future_steps} steps",
                operand="scene",
                scenario_id=scene.scenario_id,
            )

    def forward(self, scene: Scene) -> ForwardPass:
        self._check_scene(scene)
        encoding = self.encoder.encode_scene(scene)
        output = self.decoder.forward(encoding, scene)
        scores = self.scorer.score_scene(output.mode_emb)
        return ForwardPass(encoding=encoding, output=output, scores=scores)

    def loss(self, scene: Scene) -> LossBreakdown:
        """
        Composite loss of one scene with futures.

        Raises:
            SceneValidationError: If a target has no future
            NumericError: If a loss term is not finite
        """
        scene.require_futures()
        result = self.forward(scene)
        return total_loss(
            result.output,
            result.scores,
            local_targets(scene, result.encoding),
            self.cfg.loss_weights,
        )

    def predict(self, scene: Scene) -> JointPrediction:
        """Scored world-frame joint worlds, without building a graph."""
        with no_grad():
            result = self.forward(scene)
        pi = result.scores.pi
        return result.output.to_prediction(scene, result.encoding.frames, pi=pi / pi.sum())
