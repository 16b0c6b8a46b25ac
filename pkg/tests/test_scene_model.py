"""Tests for scene_model: scene types, frames, descriptors, embedding, generator, scene files."""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from core_math import ops
from core_math.gradcheck import finite_diff_check
from core_math.params import ParameterStore
from core_math.tensor import Tensor
from jointcast_core.config import GeneratorConfig
from jointcast_core.errors import (
    ConfigurationError,
    GeometryError,
    InputError,
    SceneParseError,
    SceneValidationError,
)
from scene_model.embedding import DescriptorEmbedding, embed_descriptor
from scene_model.generator import generate_scenes, generate_synthetic_scene
from scene_model.geometry import (
    LocalFrame,
    RelDescriptor,
    build_local_frames,
    permute_scene,
    rel_descriptor,
    transform_points,
    transform_scene,
    wrap_angle,
)
from scene_model.io import read_scenes, write_scenes
from scene_model.types import AgentTrack, MapPolygon, Scene
from tests.conftest import TINY_GENERATOR, straight_lane, straight_track


def assert_scenes_equal(left: Scene, right: Scene) -> None:
    assert left.scenario_id == right.scenario_id
    assert left.horizon == right.horizon
    assert [p.id for p in left.polygons] == [p.id for p in right.polygons]
    for p, q in zip(left.polygons, right.polygons):
        assert p.kind == q.kind
        np.testing.assert_array_equal(p.centerline, q.centerline)
        np.testing.assert_array_equal(p.headings, q.headings)
    assert [a.id for a in left.agents] == [a.id for a in right.agents]
    for a, b in zip(left.agents, right.agents):
        assert (a.category, a.is_target) == (b.category, b.is_target)
        for field in ("positions", "headings", "timestamps", "valid", "future_gt"):
            np.testing.assert_array_equal(getattr(a, field), getattr(b, field))


def generator(**overrides) -> GeneratorConfig:
    values = {**TINY_GENERATOR, "history_steps": 6, "future_steps": 6}
    values.update(overrides)
    return GeneratorConfig(**values)


# --- Scene types ---


class TestSceneTypes:
    def test_target_accessors(self, simple_scene):
        assert simple_scene.target_ids == ["a", "b"]
        np.testing.assert_array_equal(simple_scene.target_indices, [0, 1])
        assert simple_scene.history_steps == 6
        assert simple_scene.target_futures().shape == (2, 6, 2)

    def test_scene_needs_a_target(self):
        with pytest.raises(SceneValidationError):
            Scene(
                "no-target",
                (straight_lane("lane", (0, 0), (10, 0)),),
                (straight_track("a", (0, 0), (1, 0), is_target=False),),
                horizon=6,
            )

    def test_future_length_must_match_horizon(self):
        with pytest.raises(SceneValidationError, match="horizon"):
            Scene("h", (), (straight_track("a", (0, 0), (1, 0), horizon=4),), horizon=6)

    def test_timestamps_must_advance_by_step(self):
        track = straight_track("a", (0, 0), (1, 0))
        with pytest.raises(SceneValidationError, match="Timestamps"):
            replace(track, timestamps=np.arange(6) * 0.2)

    def test_invalid_steps_may_be_unobserved(self):
        track = straight_track("a", (0, 0), (1, 0))
        positions = track.positions.copy()
        positions[0] = np.nan
        valid = np.ones(6, dtype=bool)
        valid[0] = False
        patched = replace(track, positions=positions, valid=valid)
        assert not patched.valid[0]

    def test_coincident_centerline_points(self):
        with pytest.raises(GeometryError):
            MapPolygon("bad", "lane", np.array([[0.0, 0.0], [0.0, 0.0]]), np.zeros(2))

    def test_missing_futures_reported(self):
        track = replace(straight_track("a", (0, 0), (1, 0)), future_gt=None)
        scene = Scene("s", (), (track,), horizon=6)
        assert not scene.has_futures()
        with pytest.raises(SceneValidationError) as exc:
            scene.require_futures()
        assert exc.value.extra["agents"] == ["a"]


# --- Frames and descriptors ---


class TestLocalFrames:
    def test_identity_frame(self):
        frame = LocalFrame(np.zeros(2), 0.0, 0.0)
        np.testing.assert_array_equal(frame.origin, [0.0, 0.0])
        assert frame.heading == 0.0

    def test_agent_and_polygon_frames(self, simple_scene):
        frames = build_local_frames(simple_scene)
        first = frames.agent_frame(0, 0)
        np.testing.assert_allclose(first.origin, [2.0, 0.0])
        assert first.heading == 0.0
        assert first.time == pytest.approx(0.1)
        lane = frames.polygon_frame(1)
        np.testing.assert_allclose(lane.origin, [0.0, 4.0])
        assert (lane.heading, lane.time) == (0.0, 0.0)

    def test_two_point_lane_frame(self):
        scene = Scene(
            "lane",
            (straight_lane("lane", (0.0, 0.0), (10.0, 0.0), points=2),),
            (straight_track("a", (0, 0), (1, 0)),),
            horizon=6,
        )
        frames = build_local_frames(scene)
        np.testing.assert_array_equal(frames.polygon_origins, [[0.0, 0.0]])
        np.testing.assert_array_equal(frames.polygon_headings, [0.0])

    def test_invalid_step_borrows_nearest_valid_state(self):
        track = straight_track("a", (0, 0), (1, 0))
        positions = track.positions.copy()
        positions[[0, 3]] = np.nan
        valid = np.ones(6, dtype=bool)
        valid[[0, 3]] = False
        scene = Scene("gap", (), (replace(track, positions=positions, valid=valid),), horizon=6)
        frames = build_local_frames(scene)
        np.testing.assert_array_equal(frames.agent_origins[0, 0], positions[1])
        np.testing.assert_array_equal(frames.agent_origins[0, 3], positions[2])
        np.testing.assert_array_equal(frames.agent_valid[0], valid)

    def test_frames_follow_rigid_motion(self, simple_scene):
        theta, shift = 0.7, (12.0, -5.0)
        frames = build_local_frames(simple_scene)
        moved = build_local_frames(transform_scene(simple_scene, theta, shift, time_shift=3.0))
        np.testing.assert_allclose(
            moved.agent_origins, transform_points(frames.agent_origins, theta, shift), atol=1e-12
        )
        np.testing.assert_allclose(
            moved.agent_headings, wrap_angle(frames.agent_headings + theta), atol=1e-12
        )
        np.testing.assert_allclose(moved.agent_times, frames.agent_times + 3.0)
        np.testing.assert_allclose(
            moved.polygon_origins,
            transform_points(frames.polygon_origins, theta, shift),
            atol=1e-12,
        )


class TestWrapAngle:
    @pytest.mark.parametrize(
        "angle, expected",
        [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi), (1.5 * math.pi, -0.5 * math.pi)],
    )
    def test_half_open_interval(self, angle, expected):
        assert float(wrap_angle(angle)) == pytest.approx(expected)


class TestRelDescriptor:
    def test_self_descriptor(self):
        frame = LocalFrame((4.0, -2.0), 1.2, 3.0)
        assert rel_descriptor(frame, frame) == RelDescriptor(0.0, 0.0, 0.0, 0.0)

    def test_hand_geometry(self):
        query = LocalFrame((0.0, 0.0), 0.0, 1.0)
        key = LocalFrame((3.0, 4.0), math.pi / 2, 1.5)
        d = rel_descriptor(query, key)
        assert d.distance == pytest.approx(5.0)
        assert d.bearing == pytest.approx(math.atan2(4.0, 3.0))
        assert d.heading_diff == pytest.approx(math.pi / 2)
        assert d.time_diff == pytest.approx(0.5)

    def test_bearing_is_in_query_frame(self):
        query = LocalFrame((1.0, 1.0), math.pi / 2, 0.0)
        key = LocalFrame((1.0, 3.0), 0.0, 0.0)
        assert rel_descriptor(query, key).bearing == pytest.approx(0.0)

    def test_invariant_to_rigid_motion_and_time_shift(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            q_origin, k_origin = rng.uniform(-50, 50, size=(2, 2))
            q_heading, k_heading = rng.uniform(-math.pi, math.pi, size=2)
            q_time, k_time = rng.uniform(0, 5, size=2)
            theta = float(rng.uniform(-math.pi, math.pi))
            shift = rng.uniform(-100, 100, size=2)
            dt = float(rng.uniform(-1000, 1000))

            before = rel_descriptor(
                LocalFrame(q_origin, q_heading, q_time), LocalFrame(k_origin, k_heading, k_time)
            )
            moved_q = transform_points(q_origin, theta, shift)
            moved_k = transform_points(k_origin, theta, shift)
            after = rel_descriptor(
                LocalFrame(moved_q, q_heading + theta, q_time + dt),
                LocalFrame(moved_k, k_heading + theta, k_time + dt),
            )
            np.testing.assert_allclose(after.as_array(), before.as_array(), atol=1e-9)


# --- Embedding ---


class TestDescriptorEmbedding:
    def test_zero_descriptor_is_deterministic(self):
        zero = RelDescriptor(0.0, 0.0, 0.0, 0.0)
        first = DescriptorEmbedding(ParameterStore(rng_seed=4), "emb", 8, num_bands=3)
        second = DescriptorEmbedding(ParameterStore(rng_seed=4), "emb", 8, num_bands=3)
        out = embed_descriptor(first, zero)
        assert out.shape == (8,)
        np.testing.assert_array_equal(out.data, embed_descriptor(second, zero).data)

    def test_equal_descriptors_equal_embeddings(self, store):
        emb = DescriptorEmbedding(store, "emb", 8, num_bands=3)
        d = np.array([[5.0, 0.3, -1.0, 0.5], [5.0, 0.3, -1.0, 0.5]])
        out = emb(d)
        np.testing.assert_array_equal(out.data[0], out.data[1])

    def test_angle_features_continuous_across_wrap(self, store):
        emb = DescriptorEmbedding(store, "emb", 8, num_bands=3)
        features = emb.features(np.array([[1.0, math.pi, 0.0, 0.0], [1.0, -math.pi, 0.0, 0.0]]))
        np.testing.assert_allclose(features.data[0], features.data[1], atol=1e-12)

    def test_gradcheck(self, store):
        emb = DescriptorEmbedding(store, "emb", 8, num_bands=2)
        d = Tensor(np.random.default_rng(2).uniform(-2, 2, (3, 4)), requires_grad=True)
        params = [store.get(n) for n in store.names("emb.")]
        assert finite_diff_check(lambda: ops.sum(ops.square(emb(d))), [d, *params]) < 1e-5


# --- Scene transforms ---


class TestSceneTransforms:
    def test_transform_moves_futures(self, simple_scene):
        moved = transform_scene(simple_scene, math.pi / 2, (1.0, 0.0))
        expected = transform_points(simple_scene.agents[0].future_gt, math.pi / 2, (1.0, 0.0))
        np.testing.assert_allclose(moved.agents[0].future_gt, expected)

    def test_permutation(self, simple_scene):
        permuted = permute_scene(simple_scene, agent_order=[2, 0, 1], polygon_order=[1, 0])
        assert [a.id for a in permuted.agents] == ["c", "a", "b"]
        assert [p.id for p in permuted.polygons] == ["lane-1", "lane-0"]
        assert permuted.target_ids == ["a", "b"]

    def test_bad_permutation(self, simple_scene):
        with pytest.raises(InputError):
            permute_scene(simple_scene, agent_order=[0, 0, 1])


# --- Synthetic generator ---


class TestGenerator:
    def test_deterministic_per_seed(self):
        cfg = generator()
        assert_scenes_equal(generate_synthetic_scene(7, cfg), generate_synthetic_scene(7, cfg))

    def test_seeds_differ(self):
        cfg = generator()
        a, b = generate_synthetic_scene(1, cfg), generate_synthetic_scene(2, cfg)
        assert not np.array_equal(a.polygons[0].centerline, b.polygons[0].centerline)

    def test_counts_within_config(self):
        cfg = generator()
        for scene in generate_scenes(10, seed=0, cfg=cfg):
            lanes = [p for p in scene.polygons if p.kind == "lane"]
            assert cfg.min_lanes <= len(lanes) <= cfg.max_lanes
            assert len(scene.polygons) - len(lanes) <= cfg.max_crosswalks
            assert cfg.min_agents <= scene.num_agents <= cfg.max_agents
            assert scene.history_steps == 6
            assert scene.horizon == 6
            assert scene.has_futures()

    def test_targets_are_moving_agents(self):
        for scene in generate_scenes(10, seed=3, cfg=generator(static_fraction=0.5)):
            for agent in scene.agents:
                moved = not np.allclose(agent.future_gt[-1], agent.positions[0])
                assert agent.is_target == moved

    def test_single_agent_scene(self):
        scene = generate_synthetic_scene(5, generator(min_agents=1, max_agents=1))
        assert scene.num_agents == 1
        assert len(scene.target_indices) == 1

    def test_constant_speed_closed_form(self):
        speed = 5.0
        cfg = generator(
            min_lanes=1,
            max_lanes=1,
            min_agents=1,
            max_agents=1,
            arc_fraction=0.0,
            accel_noise=0.0,
            min_speed=speed,
            max_speed=speed,
        )
        scene = generate_synthetic_scene(9, cfg)
        agent = scene.agents[0]
        travel = agent.future_gt[-1] - agent.positions[0]
        # observed from t = dt, so T + T' - 1 steps separate the two points
        assert np.linalg.norm(travel) == pytest.approx(speed * (6 + 6 - 1) * 0.1)
        heading = agent.headings[0]
        np.testing.assert_allclose(
            travel / np.linalg.norm(travel), [math.cos(heading), math.sin(heading)], atol=1e-12
        )
        spawn = agent.positions[0] - speed * 0.1 * travel / np.linalg.norm(travel)
        expected_end = spawn + speed * (6 + 6) * 0.1 * travel / np.linalg.norm(travel)
        np.testing.assert_allclose(agent.future_gt[-1], expected_end, atol=1e-9)

    def test_shared_lane_keeps_gap(self):
        cfg = generator(
            min_lanes=1,
            max_lanes=1,
            min_agents=4,
            max_agents=4,
            arc_fraction=0.0,
            static_fraction=0.0,
        )
        for seed in range(5):
            scene = generate_synthetic_scene(seed, cfg)
            paths = [np.concatenate([a.positions, a.future_gt]) for a in scene.agents]
            for leader, follower in zip(paths, paths[1:]):
                gaps = np.linalg.norm(leader - follower, axis=-1)
                assert gaps.min() >= cfg.min_gap - 1e-9

    def test_infeasible_config(self):
        cfg = generator(min_lanes=1, max_lanes=1, agents_per_lane=2, min_agents=1, max_agents=3)
        with pytest.raises(ConfigurationError):
            generate_synthetic_scene(0, cfg)

    def test_scene_ids(self):
        scenes = generate_scenes(3, seed=5, cfg=generator(), prefix="train")
        assert [s.scenario_id for s in scenes] == [
            "train-5-00000",
            "train-5-00001",
            "train-5-00002",
        ]

    def test_zero_scenes(self):
        assert generate_scenes(0, seed=1, cfg=generator()) == []


# --- Scene files ---


class TestSceneFiles:
    def test_empty_round_trip(self, tmp_dir):
        path = write_scenes([], Path(tmp_dir) / "empty.jsonl")
        assert path.read_text() == ""
        assert read_scenes(path) == []

    def test_generated_scenes_round_trip_exactly(self, tmp_dir, tiny_scenes):
        path = write_scenes(tiny_scenes, Path(tmp_dir) / "scenes.jsonl")
        restored = read_scenes(path, require_futures=True)
        assert len(restored) == len(tiny_scenes)
        for original, copy in zip(tiny_scenes, restored):
            assert_scenes_equal(original, copy)

    def test_unobserved_positions_round_trip(self, tmp_dir):
        track = straight_track("a", (0, 0), (1, 0))
        positions = track.positions.copy()
        positions[2] = np.nan
        valid = np.ones(6, dtype=bool)
        valid[2] = False
        scene = Scene("gap", (), (replace(track, positions=positions, valid=valid),), horizon=6)
        path = write_scenes([scene], Path(tmp_dir) / "gap.jsonl")
        assert "null" in path.read_text()
        assert_scenes_equal(read_scenes(path)[0], scene)

    def test_unobserved_headings_round_trip(self, tmp_dir):
        track = straight_track("a", (0, 0), (1, 0))
        positions, headings = track.positions.copy(), track.headings.copy()
        positions[0], headings[0] = np.nan, np.nan
        valid = np.ones(6, dtype=bool)
        valid[0] = False
        gap = replace(track, positions=positions, headings=headings, valid=valid)
        scene = Scene("heading-gap", (), (gap,), horizon=6)
        path = write_scenes([scene], Path(tmp_dir) / "heading.jsonl")
        restored = read_scenes(path)[0]
        assert np.isnan(restored.agents[0].headings[0])
        assert_scenes_equal(restored, scene)

    def test_malformed_record_reports_line(self, tmp_dir, simple_scene):
        path = write_scenes([simple_scene], Path(tmp_dir) / "bad.jsonl")
        with path.open("a") as f:
            f.write('{"scenario_id": "broken", "polygons": []}\n')
        with pytest.raises(SceneParseError) as exc:
            read_scenes(path)
        assert exc.value.line == 2

    def test_training_read_requires_futures(self, tmp_dir):
        track = replace(straight_track("a", (0, 0), (1, 0)), future_gt=None)
        scene = Scene("no-future", (), (track,), horizon=6)
        path = write_scenes([scene], Path(tmp_dir) / "nofuture.jsonl")
        assert read_scenes(path, horizon=6)[0].horizon == 6
        with pytest.raises(SceneValidationError) as exc:
            read_scenes(path, require_futures=True, horizon=6)
        assert exc.value.extra["line"] == 1

    def test_agent_track_type(self, tiny_scene):
        assert all(isinstance(a, AgentTrack) for a in tiny_scene.agents)
