"""Tests for the scene scorer and its pooling baselines."""

from __future__ import annotations

import numpy as np
import pytest

from core_math import ops
from core_math.gradcheck import finite_diff_check
from core_math.layers import linear
from core_math.tensor import Tensor
from jointcast_core.errors import DimensionError
from scoring.scorer import SceneScorer, average_pool, max_pool
from tests.conftest import tiny_config


def embeddings(modes: int, agents: int, dim: int = 16, seed: int = 0) -> Tensor:
    rng = np.random.default_rng(seed)
    return Tensor(rng.standard_normal((modes, agents, dim)), requires_grad=True)


@pytest.fixture
def scorer(tiny_cfg, store) -> SceneScorer:
    return SceneScorer(store, tiny_cfg)


# --- Attentive pooling ---


class TestAttentivePool:
    def test_single_agent_weight_is_one(self, scorer, store):
        emb = embeddings(3, 1)
        pooled = scorer.attentive_pool(emb)
        np.testing.assert_allclose(scorer.last_weights, 1.0)
        values = linear(emb, store.get("scorer.to_value.weight"), store.get("scorer.to_value.bias"))
        np.testing.assert_allclose(pooled.data, values.data[:, 0], atol=1e-12)

    def test_weights_sum_to_one_per_mode(self, scorer):
        scorer.attentive_pool(embeddings(3, 5))
        np.testing.assert_allclose(scorer.last_weights.sum(axis=-1), 1.0, atol=1e-12)

    def test_duplicate_agents_match_single(self, scorer):
        single = embeddings(3, 1)
        doubled = Tensor(np.concatenate([single.data, single.data], axis=1))
        np.testing.assert_allclose(
            scorer.attentive_pool(doubled).data, scorer.attentive_pool(single).data, atol=1e-12
        )

    def test_agent_permutation_invariance(self, scorer):
        emb = embeddings(3, 4, seed=1)
        permuted = Tensor(emb.data[:, [2, 0, 3, 1]])
        np.testing.assert_allclose(
            scorer.attentive_pool(permuted).data, scorer.attentive_pool(emb).data, atol=1e-12
        )

    def test_no_targets(self, scorer):
        with pytest.raises(DimensionError):
            scorer.attentive_pool(Tensor(np.zeros((3, 0, 16))))

    def test_width_mismatch(self, scorer):
        with pytest.raises(DimensionError):
            scorer.attentive_pool(Tensor(np.zeros((3, 2, 8))))


# --- Scene scores ---


class TestSceneScores:
    def test_identical_modes_give_uniform_pi(self, scorer):
        row = np.random.default_rng(2).standard_normal((1, 2, 16))
        scores = scorer.score_scene(Tensor(np.repeat(row, 3, axis=0)))
        np.testing.assert_allclose(scores.pi, np.full(3, 1.0 / 3.0), atol=1e-12)

    def test_pi_normalized(self, scorer):
        for seed in range(5):
            scores = scorer.score_scene(embeddings(3, 3, seed=seed))
            assert abs(scores.pi.sum() - 1.0) < 1e-6
            assert scores.logits.shape == (3,)

    def test_per_mode_queries(self, store):
        scorer = SceneScorer(store, tiny_config(per_mode_pool_query=True))
        assert store.get("scorer.pool_query").shape == (3, 16)
        scores = scorer.score_scene(embeddings(3, 2))
        assert abs(scores.pi.sum() - 1.0) < 1e-6

    @pytest.mark.parametrize("mode", [0, 2])
    def test_gradcheck_negative_log_pi(self, scorer, store, mode):
        emb = embeddings(3, 2, seed=4)
        params = [store.get(n) for n in store.names("scorer.")]
        check = finite_diff_check(
            lambda: ops.neg(ops.index(scorer.score_scene(emb).log_pi, mode)),
            [emb, *params],
        )
        assert check < 1e-5


# --- Pooling baselines ---


class TestPoolingBaselines:
    def test_average_pool(self):
        emb = Tensor(np.array([[[1.0, 2.0], [3.0, 6.0]]]))
        np.testing.assert_array_equal(average_pool(emb).data, [[2.0, 4.0]])

    def test_max_pool(self):
        emb = Tensor(np.array([[[1.0, 7.0], [3.0, 6.0]]]))
        np.testing.assert_array_equal(max_pool(emb).data, [[3.0, 7.0]])

    def test_baselines_are_permutation_invariant(self):
        emb = embeddings(2, 3, seed=5)
        permuted = Tensor(emb.data[:, [1, 2, 0]])
        np.testing.assert_allclose(average_pool(permuted).data, average_pool(emb).data)
        np.testing.assert_array_equal(max_pool(permuted).data, max_pool(emb).data)
