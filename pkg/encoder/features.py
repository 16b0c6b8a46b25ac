"""
Invariant Input Features

Map segments and agent steps described in their own local frames, so the
encoder input is unchanged by rigid motions of the scene and by shifts of
its clock.
"""

from __future__ import annotations

import numpy as np

from scene_model.geometry import SceneFrames, to_local, wrap_angle
from scene_model.types import STEP_SECONDS, AgentCategory, PolygonKind, Scene

MAP_SCALE = 0.02
SEGMENT_FEATURES = 7
AGENT_FEATURES = 6 + len(AgentCategory)
POLYGON_KINDS = list(PolygonKind)
AGENT_CATEGORIES = list(AgentCategory)


def map_segment_features(scene: Scene, frames: SceneFrames) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-segment features of every polygon in its own frame.

    Features: length, sin/cos of segment direction, sin/cos of turning
    angle from the previous segment, scaled midpoint (x, y).

    Returns:
        (features [M, S, 7], mask [M, S]) with S the longest segment count
    """
    num_segments = max(p.num_points - 1 for p in scene.polygons)
    features = np.zeros((scene.num_polygons, num_segments, SEGMENT_FEATURES))
    mask = np.zeros((scene.num_polygons, num_segments), dtype=bool)
    for m, polygon in enumerate(scene.polygons):
        points = to_local(
            polygon.centerline, frames.polygon_origins[m], frames.polygon_headings[m]
        )
        segments = np.diff(points, axis=0)
        direction = np.arctan2(segments[:, 1], segments[:, 0])
        turn = np.zeros_like(direction)
        turn[1:] = wrap_angle(np.diff(direction))
        midpoints = 0.5 * (points[:-1] + points[1:]) * MAP_SCALE
        n = segments.shape[0]
        features[m, :n] = np.column_stack(
            [
                np.hypot(segments[:, 0], segments[:, 1]),
                np.sin(direction),
                np.cos(direction),
                np.sin(turn),
                np.cos(turn),
                midpoints,
            ]
        )
        mask[m, :n] = True
    return features, mask


def polygon_kind_one_hot(scene: Scene) -> np.ndarray:
    one_hot = np.zeros((scene.num_polygons, len(POLYGON_KINDS)))
    for m, polygon in enumerate(scene.polygons):
        one_hot[m, POLYGON_KINDS.index(polygon.kind)] = 1.0
    return one_hot


def agent_step_features(scene: Scene, frames: SceneFrames) -> np.ndarray:
    """
    Per-step agent features [A, T, 9].

    Features: velocity (x, y) in the step's own frame, speed, yaw rate,
    motion-valid flag, valid flag, category one-hot. Motion terms are zero
    at the first step and wherever either endpoint step is invalid.
    """
    num_agents, num_steps = frames.num_agents, frames.num_steps
    features = np.zeros((num_agents, num_steps, AGENT_FEATURES))
    valid = frames.agent_valid
    if num_steps > 1:
        displacement = np.diff(frames.agent_origins, axis=1)
        velocity = to_local(displacement, np.zeros(2), frames.agent_headings[:, 1:]) / STEP_SECONDS
        yaw_rate = wrap_angle(np.diff(frames.agent_headings, axis=1)) / STEP_SECONDS
        moved = valid[:, 1:] & valid[:, :-1]
        motion = np.concatenate(
            [
                velocity,
                np.hypot(velocity[..., 0], velocity[..., 1])[..., None],
                yaw_rate[..., None],
                np.ones_like(yaw_rate)[..., None],
            ],
            axis=-1,
        )
        features[:, 1:, :5] = np.where(moved[..., None], motion, 0.0)
    features[..., 5] = valid
    for a, agent in enumerate(scene.agents):
        features[a, :, 6 + AGENT_CATEGORIES.index(agent.category)] = 1.0
    return features
