"""
Local Frames and Relative Descriptors

Every scene element gets a local spacetime frame (origin, heading, time).
Relations between elements are described in the query element's frame by
(distance, bearing, heading difference, time difference), which is
unchanged by any global rigid motion of the scene or shift of its clock.

Also provides the rigid-transform, time-shift and permutation utilities
used by the invariance audit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from jointcast_core.errors import GeometryError, InputError
from scene_model.types import MapPolygon, Scene


def wrap_angle(angle: np.ndarray | float) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=np.float64), 2.0 * np.pi)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def transform_points(
    points: np.ndarray, theta: float, translation: Sequence[float] = (0.0, 0.0)
) -> np.ndarray:
    """Rotate [..., 2] points by theta about the origin, then translate."""
    return np.asarray(points, dtype=np.float64) @ rotation_matrix(theta).T + np.asarray(
        translation, dtype=np.float64
    )


def to_local(points: np.ndarray, origin: np.ndarray, heading: np.ndarray) -> np.ndarray:
    """Express world points [..., 2] in frames with broadcastable origin [..., 2] and heading."""
    offset = np.asarray(points, dtype=np.float64) - origin
    c, s = np.cos(heading), np.sin(heading)
    x = c * offset[..., 0] + s * offset[..., 1]
    y = -s * offset[..., 0] + c * offset[..., 1]
    return np.stack([x, y], axis=-1)


@dataclass(frozen=True, eq=False)
class LocalFrame:
    """Spacetime coordinate system of one scene element."""

    origin: np.ndarray
    heading: float
    time: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(2))
        object.__setattr__(self, "heading", float(wrap_angle(self.heading)))
        object.__setattr__(self, "time", float(self.time))


@dataclass(frozen=True)
class RelDescriptor:
    """Position, orientation and time of a key element seen from a query frame."""

    distance: float
    bearing: float
    heading_diff: float
    time_diff: float

    def as_array(self) -> np.ndarray:
        return np.array([self.distance, self.bearing, self.heading_diff, self.time_diff])


@dataclass(frozen=True, eq=False)
class SceneFrames:
    """
    Frames of every agent state and every polygon, as arrays.

    Invalid agent steps carry the nearest valid state so their rows stay
    covariant with the scene; attention masks exclude them as keys.
    """

    agent_origins: np.ndarray  # [A, T, 2]
    agent_headings: np.ndarray  # [A, T]
    agent_times: np.ndarray  # [A, T]
    agent_valid: np.ndarray  # [A, T]
    polygon_origins: np.ndarray  # [M, 2]
    polygon_headings: np.ndarray  # [M]
    polygon_times: np.ndarray  # [M]

    @property
    def num_agents(self) -> int:
        return int(self.agent_origins.shape[0])

    @property
    def num_steps(self) -> int:
        return int(self.agent_origins.shape[1])

    @property
    def num_polygons(self) -> int:
        return int(self.polygon_origins.shape[0])

    def agent_frame(self, agent: int, step: int) -> LocalFrame:
        return LocalFrame(
            self.agent_origins[agent, step],
            self.agent_headings[agent, step],
            self.agent_times[agent, step],
        )

    def polygon_frame(self, polygon: int) -> LocalFrame:
        return LocalFrame(
            self.polygon_origins[polygon],
            self.polygon_headings[polygon],
            self.polygon_times[polygon],
        )

    @property
    def current_origins(self) -> np.ndarray:
        return self.agent_origins[:, -1]

    @property
    def current_headings(self) -> np.ndarray:
        return self.agent_headings[:, -1]

    @property
    def current_times(self) -> np.ndarray:
        return self.agent_times[:, -1]


def _fill_invalid(valid: np.ndarray) -> np.ndarray:
    """Index of the state each step borrows: itself if valid, else nearest earlier, else first."""
    steps = np.arange(valid.shape[0])
    source = np.maximum.accumulate(np.where(valid, steps, -1))
    return np.where(source < 0, int(np.argmax(valid)), source)


def polygon_frame(polygon: MapPolygon) -> LocalFrame:
    """
    Frame at the first centerline point, aligned with the first segment.

    Raises:
        GeometryError: If the first two points coincide
    """
    segment = polygon.centerline[1] - polygon.centerline[0]
    if not np.any(segment):
        raise GeometryError("First segment of polygon is degenerate", polygon=polygon.id)
    return LocalFrame(polygon.centerline[0], float(np.arctan2(segment[1], segment[0])), 0.0)


def build_local_frames(scene: Scene) -> SceneFrames:
    """
    Build frames for every agent state (A x T) and every polygon.

    Agent frames are (position, heading, timestamp) per step. Polygon frames
    are timeless: time 0.
    """
    origins, headings, times, valid = [], [], [], []
    for agent in scene.agents:
        source = _fill_invalid(agent.valid)
        origins.append(agent.positions[source])
        headings.append(wrap_angle(agent.headings[source]))
        times.append(agent.timestamps)
        valid.append(agent.valid)

    polygon_frames = [polygon_frame(p) for p in scene.polygons]
    return SceneFrames(
        agent_origins=np.stack(origins),
        agent_headings=np.stack(headings),
        agent_times=np.stack(times),
        agent_valid=np.stack(valid),
        polygon_origins=np.array([f.origin for f in polygon_frames]).reshape(-1, 2),
        polygon_headings=np.array([f.heading for f in polygon_frames], dtype=np.float64),
        polygon_times=np.zeros(len(polygon_frames)),
    )


def rel_descriptors(
    query_origin: np.ndarray,
    query_heading: np.ndarray,
    query_time: np.ndarray,
    key_origin: np.ndarray,
    key_heading: np.ndarray,
    key_time: np.ndarray,
) -> np.ndarray:
    """
    Vectorized relative descriptors over broadcastable frame arrays.

    Returns:
        [..., 4] array of (distance, bearing, heading_diff, time_diff)
    """
    offset = np.asarray(key_origin, dtype=np.float64) - np.asarray(query_origin, dtype=np.float64)
    local = to_local(offset, np.zeros(2), query_heading)
    distance = np.hypot(offset[..., 0], offset[..., 1])
    bearing = np.arctan2(local[..., 1], local[..., 0])
    heading_diff = wrap_angle(np.asarray(key_heading) - np.asarray(query_heading))
    time_diff = np.asarray(key_time, dtype=np.float64) - np.asarray(query_time, dtype=np.float64)
    return np.stack(np.broadcast_arrays(distance, bearing, heading_diff, time_diff), axis=-1)


def rel_descriptor(query: LocalFrame, key: LocalFrame) -> RelDescriptor:
    """Describe key as seen from query."""
    values = rel_descriptors(
        query.origin, query.heading, query.time, key.origin, key.heading, key.time
    )
    return RelDescriptor(*(float(v) for v in values))


# --- Scene transforms ---


def transform_scene(
    scene: Scene,
    theta: float = 0.0,
    translation: Sequence[float] = (0.0, 0.0),
    time_shift: float = 0.0,
) -> Scene:
    """Apply one rigid motion to every position and heading and shift every timestamp."""
    polygons = tuple(
        replace(
            p,
            centerline=transform_points(p.centerline, theta, translation),
            headings=wrap_angle(p.headings + theta),
        )
        for p in scene.polygons
    )
    agents = []
    for a in scene.agents:
        moved = transform_points(np.nan_to_num(a.positions), theta, translation)
        positions = np.where(a.valid[:, None], moved, a.positions)
        future = None if a.future_gt is None else transform_points(a.future_gt, theta, translation)
        agents.append(
            replace(
                a,
                positions=positions,
                headings=wrap_angle(a.headings + theta),
                timestamps=a.timestamps + time_shift,
                future_gt=future,
            )
        )
    return replace(scene, polygons=polygons, agents=tuple(agents))


def permute_scene(
    scene: Scene,
    agent_order: Optional[Sequence[int]] = None,
    polygon_order: Optional[Sequence[int]] = None,
) -> Scene:
    """
    Reorder agents and polygons.

    Raises:
        InputError: If an order is not a permutation of the element indices
    """
    agent_order = list(range(scene.num_agents)) if agent_order is None else list(agent_order)
    polygon_order = (
        list(range(scene.num_polygons)) if polygon_order is None else list(polygon_order)
    )
    if sorted(agent_order) != list(range(scene.num_agents)):
        raise InputError("agent_order is not a permutation", order=agent_order)
    if sorted(polygon_order) != list(range(scene.num_polygons)):
        raise InputError("polygon_order is not a permutation", order=polygon_order)
    return replace(
        scene,
        agents=tuple(scene.agents[i] for i in agent_order),
        polygons=tuple(scene.polygons[i] for i in polygon_order),
    )
