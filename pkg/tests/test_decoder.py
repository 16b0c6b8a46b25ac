"""Tests for the joint decoder: proposal, refinement and world-frame predictions."""

from __future__ import annotations

import numpy as np
import pytest

from core_math import ops
from core_math.params import ParameterStore
from core_math.tensor import Tensor
from decoder.joint import JointDecoder, JointPrediction, local_to_world
from decoder.stages import SCALE_FLOOR, anchor_displacements, positive_scale
from encoder.scene_encoder import SceneEncoder
from jointcast_core.errors import NumericError, SceneValidationError
from scene_model.geometry import permute_scene, transform_points, transform_scene
from scene_model.types import Scene
from tests.conftest import straight_lane, straight_track, tiny_config


class Stack:
    """Encoder and decoder sharing one store."""

    def __init__(self, cfg, seed: int = 0) -> None:
        self.store = ParameterStore(rng_seed=seed, dtype=cfg.dtype)
        self.encoder = SceneEncoder(self.store, cfg)
        self.decoder = JointDecoder(self.store, cfg)

    def forward(self, scene):
        enc = self.encoder.encode_scene(scene)
        return enc, self.decoder.forward(enc, scene)

    def decode(self, scene) -> JointPrediction:
        return self.decoder.decode(self.encoder.encode_scene(scene), scene)

    def zero(self, prefix: str) -> None:
        for name in self.store.names(prefix):
            self.store.get(name).data[...] = 0.0


def last_layer(prefix: str) -> str:
    return f"{prefix}.1."


# --- Shapes and composition ---


class TestJointDecoder:
    def test_output_shapes(self, tiny_cfg, simple_scene):
        _, out = Stack(tiny_cfg).forward(simple_scene)
        k, t = tiny_cfg.num_modes, tiny_cfg.future_steps
        assert out.proposal.traj.shape == (k, 3, t, 2)
        assert out.proposal_traj.shape == (k, 2, t, 2)
        assert out.refined_traj.shape == (k, 2, t, 2)
        assert out.refined_scales.shape == (k, 2, t, 2)
        assert out.mode_emb.shape == (k, 2, tiny_cfg.hidden_dim)

    def test_six_joint_modes(self, simple_scene):
        cfg = tiny_config(num_modes=6, recurrent_steps=3, chunk_steps=2, future_steps=6)
        prediction = Stack(cfg).decode(simple_scene)
        assert prediction.refined_traj.shape == (6, 2, 6, 2)

    def test_decode_leaves_pi_uniform(self, tiny_cfg, simple_scene):
        prediction = Stack(tiny_cfg).decode(simple_scene)
        np.testing.assert_allclose(prediction.pi, np.full(3, 1.0 / 3.0))
        assert prediction.agent_ids == ["a", "b"]
        assert prediction.num_modes == 3

    def test_stack_passes(self, tiny_cfg, simple_scene):
        stack = Stack(tiny_cfg)
        stack.forward(simple_scene)
        assert stack.decoder.proposal.stack.calls == tiny_cfg.recurrent_steps
        assert stack.decoder.refinement.stack.calls == 1

    def test_scales_respect_floor(self, tiny_cfg, tiny_scenes):
        stack = Stack(tiny_cfg)
        for scene in tiny_scenes:
            _, out = stack.forward(scene)
            assert out.proposal.scales.data.min() >= SCALE_FLOOR
            assert out.refinement.scales.data.min() >= SCALE_FLOOR


# --- Proposal ---


class TestProposal:
    def test_zero_head_stays_at_current_position(self, simple_scene):
        cfg = tiny_config(num_modes=1)
        scene = Scene(
            "single",
            simple_scene.polygons,
            (straight_track("a", (2.0, 0.0), (5.0, 0.0)),),
            horizon=6,
        )
        stack = Stack(cfg)
        stack.zero(last_layer("decoder.propose.loc_head"))
        prediction = stack.decode(scene)
        current = scene.agents[0].positions[-1]
        np.testing.assert_allclose(
            prediction.proposal_traj[0, 0], np.tile(current, (6, 1)), atol=1e-12
        )

    def test_non_finite_state_names_recurrent_step(self, tiny_cfg, simple_scene):
        stack = Stack(tiny_cfg)
        stack.store.get("decoder.propose.mode_seeds").data[...] = np.nan
        with pytest.raises(NumericError) as exc:
            stack.forward(simple_scene)
        assert exc.value.stage == "propose.recurrent_step_1"

    def test_rigid_equivariance(self, tiny_cfg, simple_scene):
        theta, shift = 1.1, (25.0, -40.0)
        stack = Stack(tiny_cfg)
        base = stack.decode(simple_scene)
        moved = stack.decode(transform_scene(simple_scene, theta, shift, time_shift=2.0))
        expected = transform_points(base.refined_traj, theta, shift)
        scale = max(1.0, np.abs(expected).max())
        assert np.abs(moved.refined_traj - expected).max() / scale < 1e-4
        np.testing.assert_allclose(moved.scales, base.scales, atol=1e-8)

    def test_agent_permutation(self, tiny_cfg, simple_scene):
        stack = Stack(tiny_cfg)
        base = stack.decode(simple_scene)
        permuted = stack.decode(permute_scene(simple_scene, agent_order=[1, 2, 0]))
        assert permuted.agent_ids == ["b", "a"]
        for agent in base.agent_ids:
            i, j = base.agent_ids.index(agent), permuted.agent_ids.index(agent)
            np.testing.assert_allclose(
                permuted.refined_traj[:, j], base.refined_traj[:, i], rtol=1e-12, atol=1e-12
            )
            np.testing.assert_allclose(
                permuted.scales[:, j], base.scales[:, i], rtol=1e-12, atol=1e-12
            )


# --- Refinement ---


class TestRefinement:
    def test_zero_offset_head_returns_anchors(self, tiny_cfg, simple_scene):
        stack = Stack(tiny_cfg)
        stack.zero(last_layer("decoder.refine.offset_head"))
        _, out = stack.forward(simple_scene)
        np.testing.assert_array_equal(out.refinement.traj.data, out.proposal.traj.data)

    def test_anchor_gradient_is_severed(self, tiny_cfg, simple_scene):
        stack = Stack(tiny_cfg)
        stack.store.zero_grad()
        _, out = stack.forward(simple_scene)
        ops.sum(ops.square(out.refined_traj)).backward()
        for name in stack.store.names("decoder.propose."):
            grad = stack.store.get(name).grad
            assert grad is None or not np.any(grad), name
        refine_grads = [stack.store.get(n).grad for n in stack.store.names("decoder.refine.")]
        assert any(g is not None and np.any(g) for g in refine_grads)

    def test_anchor_displacements(self):
        anchors = np.array([[[[1.0, 0.0], [3.0, 1.0], [6.0, 1.0]]]])
        np.testing.assert_array_equal(
            anchor_displacements(anchors), [[[[1.0, 0.0], [2.0, 1.0], [3.0, 0.0]]]]
        )

    def test_positive_scale_floor(self):
        scales = positive_scale(Tensor(np.array([-1e3, 0.0, 5.0])))
        assert scales.data.min() >= SCALE_FLOOR
        assert scales.data[0] == pytest.approx(SCALE_FLOOR)


# --- World frame ---


class TestJointPrediction:
    def test_local_to_world(self):
        local = np.array([[[[1.0, 0.0], [2.0, 0.0]]]])
        world = local_to_world(local, np.array([[10.0, 5.0]]), np.array([np.pi / 2]))
        np.testing.assert_allclose(world, [[[[10.0, 6.0], [10.0, 7.0]]]], atol=1e-12)

    def test_unnormalized_pi_rejected(self, tiny_cfg, simple_scene):
        prediction = Stack(tiny_cfg).decode(simple_scene)
        with pytest.raises(SceneValidationError):
            prediction.with_scores(np.array([0.5, 0.5, 0.5]))

    def test_with_scores(self, tiny_cfg, simple_scene):
        prediction = Stack(tiny_cfg).decode(simple_scene)
        scored = prediction.with_scores(np.array([0.2, 0.3, 0.5]))
        np.testing.assert_array_equal(scored.pi, [0.2, 0.3, 0.5])
        np.testing.assert_array_equal(scored.refined_traj, prediction.refined_traj)

    def test_single_lane_scene(self, tiny_cfg):
        scene = Scene(
            "lane",
            (straight_lane("lane", (0.0, 0.0), (50.0, 0.0)),),
            (straight_track("a", (1.0, 0.0), (4.0, 0.0)),),
            horizon=6,
        )
        prediction = Stack(tiny_cfg).decode(scene)
        assert np.all(np.isfinite(prediction.refined_traj))
