"""
Synthetic Scene Generator

Desk-scale driving scenes: straight and arc lanes with optional
crosswalks, agents following lane centerlines at a per-agent cruise speed
with small acceleration noise, and lead-follow pairs sharing a lane.
Scenes are pure functions of (seed, config).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from jointcast_core.config import GeneratorConfig
from jointcast_core.errors import ConfigurationError
from scene_model.geometry import wrap_angle
from scene_model.types import (
    STEP_SECONDS,
    AgentCategory,
    AgentTrack,
    MapPolygon,
    PolygonKind,
    Scene,
)

logger = logging.getLogger(__name__)

CATEGORY_WEIGHTS = {
    AgentCategory.VEHICLE: 0.7,
    AgentCategory.CYCLIST: 0.15,
    AgentCategory.PEDESTRIAN: 0.15,
}
CROSSWALK_HALF_WIDTH = 4.0
CROSSWALK_POINTS = 5
SPAWN_JITTER = 5.0


@dataclass(frozen=True)
class LaneShape:
    """Closed-form lane centerline parameterized by arc length."""

    origin: np.ndarray
    heading: float
    curvature: float

    def heading_at(self, s: np.ndarray) -> np.ndarray:
        return wrap_angle(self.heading + self.curvature * np.asarray(s, dtype=np.float64))

    def position_at(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        h0 = self.heading
        if self.curvature == 0.0:
            offset = np.stack([s * np.cos(h0), s * np.sin(h0)], axis=-1)
        else:
            k = self.curvature
            h = h0 + k * s
            offset = np.stack(
                [(np.sin(h) - np.sin(h0)) / k, (np.cos(h0) - np.cos(h)) / k], axis=-1
            )
        return self.origin + offset


def check_feasible(cfg: GeneratorConfig) -> None:
    """
    Raises:
        ConfigurationError: If some seed could draw more agents than the lanes hold
    """
    capacity = cfg.min_lanes * cfg.agents_per_lane
    if cfg.max_agents > capacity:
        raise ConfigurationError(
            f"Up to {cfg.max_agents} agents do not fit on {cfg.min_lanes} lanes "
            f"of capacity {cfg.agents_per_lane}",
            max_agents=cfg.max_agents,
            capacity=capacity,
        )


def _sample_lanes(rng: np.random.Generator, cfg: GeneratorConfig) -> list[LaneShape]:
    count = int(rng.integers(cfg.min_lanes, cfg.max_lanes + 1))
    lanes = []
    for _ in range(count):
        origin = rng.uniform(-cfg.spawn_extent, cfg.spawn_extent, size=2)
        heading = float(rng.uniform(-np.pi, np.pi))
        curvature = 0.0
        if rng.random() < cfg.arc_fraction:
            curvature = float(rng.uniform(-cfg.max_curvature, cfg.max_curvature))
        lanes.append(LaneShape(origin, heading, curvature))
    return lanes


def _lane_polygon(lane_id: str, lane: LaneShape, cfg: GeneratorConfig) -> MapPolygon:
    s = np.arange(0.0, cfg.lane_length + 0.5 * cfg.lane_spacing, cfg.lane_spacing)
    return MapPolygon(lane_id, PolygonKind.LANE, lane.position_at(s), lane.heading_at(s))


def _crosswalk_polygon(
    crosswalk_id: str, lane: LaneShape, s: float, rng: np.random.Generator
) -> MapPolygon:
    center = lane.position_at(s)
    heading = float(lane.heading_at(s)) + np.pi / 2.0
    if rng.random() < 0.5:
        heading += np.pi
    direction = np.array([np.cos(heading), np.sin(heading)])
    offsets = np.linspace(-CROSSWALK_HALF_WIDTH, CROSSWALK_HALF_WIDTH, CROSSWALK_POINTS)
    points = center + offsets[:, None] * direction
    return MapPolygon(
        crosswalk_id,
        PolygonKind.CROSSWALK,
        points,
        np.full(CROSSWALK_POINTS, float(wrap_angle(heading))),
    )


def _assign_lanes(
    rng: np.random.Generator, num_agents: int, num_lanes: int, cfg: GeneratorConfig
) -> list[int]:
    """Lane per agent; joins an occupied lane with probability lead_follow_fraction."""
    occupancy = [0] * num_lanes
    assignment = []
    for _ in range(num_agents):
        open_lanes = [i for i in range(num_lanes) if occupancy[i] < cfg.agents_per_lane]
        occupied = [i for i in open_lanes if occupancy[i] > 0]
        if occupied and rng.random() < cfg.lead_follow_fraction:
            lane = int(rng.choice(occupied))
        else:
            empty = [i for i in open_lanes if occupancy[i] == 0]
            lane = int(rng.choice(empty or open_lanes))
        occupancy[lane] += 1
        assignment.append(lane)
    return assignment


def _arc_lengths(
    rng: np.random.Generator,
    start: float,
    speed: float,
    total_steps: int,
    cfg: GeneratorConfig,
) -> np.ndarray:
    """Arc length after each of total_steps steps; speed drifts by integrated noise."""
    if speed == 0.0:
        return np.full(total_steps, start)
    accel = rng.standard_normal(total_steps) * cfg.accel_noise
    speeds = np.maximum(speed + np.cumsum(accel) * STEP_SECONDS, 0.0)
    return start + np.cumsum(speeds * STEP_SECONDS)


def generate_synthetic_scene(
    seed: int,
    cfg: Optional[GeneratorConfig] = None,
    scenario_id: Optional[str] = None,
) -> Scene:
    """
    Generate one synthetic scene.

    Agents spawn at t = 0 and are observed at t = dt, 2 dt, ..., T dt; the
    future continues the same kinematics for T' steps. On a shared lane each
    follower is held at least min_gap behind the agent ahead of it. Parked
    agents are non-targets; at least one agent is always moving.

    Args:
        seed: Seed of the scene's random stream
        cfg: Generator settings (defaults when omitted)
        scenario_id: Identifier; defaults to "synthetic-<seed>"

    Returns:
        A validated Scene with future_gt on every agent

    Raises:
        ConfigurationError: If the agent count can exceed lane capacity
    """
    cfg = cfg or GeneratorConfig()
    check_feasible(cfg)
    rng = np.random.default_rng(seed)

    lanes = _sample_lanes(rng, cfg)
    polygons = [_lane_polygon(f"lane-{i}", lane, cfg) for i, lane in enumerate(lanes)]
    for j in range(int(rng.integers(0, cfg.max_crosswalks + 1))):
        lane = lanes[int(rng.integers(len(lanes)))]
        s = float(rng.uniform(0.2, 0.8) * cfg.lane_length)
        polygons.append(_crosswalk_polygon(f"crosswalk-{j}", lane, s, rng))

    num_agents = int(rng.integers(cfg.min_agents, cfg.max_agents + 1))
    lane_of = _assign_lanes(rng, num_agents, len(lanes), cfg)
    categories = list(CATEGORY_WEIGHTS)
    probs = np.array(list(CATEGORY_WEIGHTS.values()))
    static = rng.random(num_agents) < cfg.static_fraction
    if static.all():
        static[0] = False

    total_steps = cfg.history_steps + cfg.future_steps
    arc = np.zeros((num_agents, total_steps))
    for lane_index in range(len(lanes)):
        members = [i for i in range(num_agents) if lane_of[i] == lane_index]
        # members[0] leads; each later member starts behind the previous one
        start = float(rng.uniform(0.0, cfg.spawn_extent)) + (len(members) - 1) * (
            cfg.follow_gap + SPAWN_JITTER
        )
        for rank, agent in enumerate(members):
            if rank > 0:
                start -= cfg.follow_gap + float(rng.uniform(0.0, SPAWN_JITTER))
            speed = 0.0 if static[agent] else float(rng.uniform(cfg.min_speed, cfg.max_speed))
            arc[agent] = _arc_lengths(rng, start, speed, total_steps, cfg)
            if rank > 0:
                leader = members[rank - 1]
                arc[agent] = np.minimum(arc[agent], arc[leader] - cfg.min_gap)
    category_of = [
        categories[int(k)]
        for k in rng.choice(len(categories), size=num_agents, p=probs / probs.sum())
    ]

    timestamps = (np.arange(cfg.history_steps) + 1) * STEP_SECONDS
    agents = []
    for i in range(num_agents):
        lane = lanes[lane_of[i]]
        positions = lane.position_at(arc[i])
        headings = lane.heading_at(arc[i])
        moving = bool(arc[i, -1] > arc[i, 0]) and not static[i]
        agents.append(
            AgentTrack(
                id=f"agent-{i}",
                category=category_of[i],
                positions=positions[: cfg.history_steps],
                headings=headings[: cfg.history_steps],
                timestamps=timestamps,
                valid=np.ones(cfg.history_steps, dtype=bool),
                is_target=moving,
                future_gt=positions[cfg.history_steps :],
            )
        )
    if not any(a.is_target for a in agents):
        first = next(i for i in range(num_agents) if not static[i])
        agents[first] = replace(agents[first], is_target=True)

    scene = Scene(
        scenario_id=scenario_id or f"synthetic-{seed:06d}",
        polygons=tuple(polygons),
        agents=tuple(agents),
        horizon=cfg.future_steps,
    )
    logger.debug(
        f"Generated scene {scene.scenario_id}: {len(lanes)} lanes, "
        f"{len(polygons) - len(lanes)} crosswalks, {num_agents} agents, "
        f"{len(scene.target_indices)} targets"
    )
    return scene


def generate_scenes(
    count: int,
    seed: int,
    cfg: Optional[GeneratorConfig] = None,
    prefix: str = "synthetic",
) -> list[Scene]:
    """Generate count scenes with per-scene seeds derived from seed."""
    seeds = np.random.SeedSequence(seed).generate_state(max(count, 1))[:count]
    return [
        generate_synthetic_scene(int(s), cfg, scenario_id=f"{prefix}-{seed}-{i:05d}")
        for i, s in enumerate(seeds)
    ]
