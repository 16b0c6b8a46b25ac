"""
Scene Scorer

One confidence score per joint world: the target agents' post-refinement
mode embeddings are pooled per mode, an MLP maps each pooled embedding to
a logit, and a softmax over modes gives the mixing coefficients pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from core_math import ops
from core_math.layers import MLP, Linear, Module
from core_math.params import ParameterStore
from core_math.tensor import Tensor
from jointcast_core.config import RunConfig
from jointcast_core.errors import DimensionError


@dataclass
class SceneScores:
    """Mode logits and their normalized log-probabilities."""

    logits: Tensor  # [K]
    log_pi: Tensor  # [K]

    @property
    def pi(self) -> np.ndarray:
        return np.exp(self.log_pi.data.astype(np.float64))


def average_pool(mode_emb: Tensor) -> Tensor:
    """Mean over agents: [K, A', D] -> [K, D]."""
    return ops.mean(mode_emb, axis=1)


def max_pool(mode_emb: Tensor) -> Tensor:
    """Elementwise max over agents: [K, A', D] -> [K, D]."""
    return ops.amax(mode_emb, axis=1)


class SceneScorer(Module):
    """
    Attentive pooling over target agents followed by a scoring MLP.

    With per_mode_query each mode has its own pooling query; otherwise one
    query is shared by all modes.
    """

    def __init__(self, store: ParameterStore, cfg: RunConfig, name: str = "scorer") -> None:
        super().__init__(store, name)
        dim = cfg.hidden_dim
        self.dim = dim
        self.num_modes = cfg.num_modes
        self.per_mode_query = cfg.per_mode_pool_query
        query_rows = cfg.num_modes if cfg.per_mode_pool_query else 1
        self.query = self.param("pool_query", (query_rows, dim), init="normal")
        self.to_key = self.child(Linear(store, f"{name}.to_key", dim, dim))
        self.to_value = self.child(Linear(store, f"{name}.to_value", dim, dim))
        self.score_mlp = self.child(MLP(store, f"{name}.score_mlp", dim, [dim, 1], cfg.activation))
        self.last_weights: np.ndarray | None = None

    def attentive_pool(self, mode_emb: Tensor) -> Tensor:
        """
        Pool [K, A', D] to [K, D]; attention weights over A' sum to 1 per mode.

        Raises:
            DimensionError: If there are no target agents or widths disagree
        """
        if mode_emb.ndim != 3 or mode_emb.shape[1] < 1 or mode_emb.shape[2] != self.dim:
            raise DimensionError(
                f"Expected [K, A' >= 1, {self.dim}] mode embeddings, got {mode_emb.shape}",
                operand="mode_emb",
            )
        keys = self.to_key(mode_emb)
        values = self.to_value(mode_emb)
        query = ops.reshape(self.query, (self.query.shape[0], 1, self.dim))
        scores = ops.mul(ops.sum(ops.mul(keys, query), axis=-1), 1.0 / math.sqrt(self.dim))
        weights = ops.softmax(scores, axis=-1)
        self.last_weights = weights.data
        return ops.sum(ops.mul(ops.reshape(weights, weights.shape + (1,)), values), axis=1)

    def score_scene(self, mode_emb: Tensor) -> SceneScores:
        pooled = self.attentive_pool(mode_emb)
        logits = ops.reshape(self.score_mlp(pooled), (mode_emb.shape[0],))
        return SceneScores(logits=logits, log_pi=ops.log_softmax(logits, axis=-1))
