"""Shared fixtures for jointcast tests."""

from __future__ import annotations

import os
import tempfile

import numpy as np
import pytest

os.environ.setdefault("JOINTCAST_PRECISION", "float64")

from core_math.params import ParameterStore  # noqa: E402
from jointcast_core.config import GeneratorConfig, RunConfig  # noqa: E402
from jointcast_core.settings import Precision  # noqa: E402
from scene_model.generator import generate_scenes, generate_synthetic_scene  # noqa: E402
from scene_model.types import AgentTrack, MapPolygon, Scene  # noqa: E402

TINY_MODEL = {
    "hidden_dim": 16,
    "num_heads": 2,
    "num_modes": 3,
    "encoder_layers": 1,
    "decoder_layers": 1,
    "recurrent_steps": 3,
    "chunk_steps": 2,
    "history_steps": 6,
    "future_steps": 6,
    "num_freq_bands": 2,
    "dropout": 0.0,
    "precision": Precision.FLOAT64,
    "batch_size": 2,
    "epochs": 2,
    "num_train": 4,
    "num_val": 2,
}

TINY_GENERATOR = {
    "min_lanes": 2,
    "max_lanes": 3,
    "max_crosswalks": 1,
    "min_agents": 2,
    "max_agents": 4,
    "lane_length": 60.0,
    "lane_spacing": 3.0,
}


def tiny_config(**overrides) -> RunConfig:
    """A 64-bit run config small enough for finite differences."""
    values = {**TINY_MODEL, "generator": GeneratorConfig(**TINY_GENERATOR)}
    values.update(overrides)
    return RunConfig(**values)


def straight_lane(polygon_id: str, start, end, points: int = 5) -> MapPolygon:
    start, end = np.asarray(start, dtype=float), np.asarray(end, dtype=float)
    centerline = np.linspace(start, end, points)
    heading = np.arctan2(*(end - start)[::-1])
    return MapPolygon(polygon_id, "lane", centerline, np.full(points, heading))


def straight_track(
    agent_id: str,
    start,
    velocity,
    steps: int = 6,
    horizon: int = 6,
    is_target: bool = True,
    category: str = "vehicle",
) -> AgentTrack:
    """Constant-velocity track observed for steps and continued for horizon."""
    start, velocity = np.asarray(start, dtype=float), np.asarray(velocity, dtype=float)
    times = 0.1 * np.arange(1, steps + horizon + 1)
    path = start + (times - times[0])[:, None] * velocity
    heading = float(np.arctan2(velocity[1], velocity[0])) if np.any(velocity) else 0.0
    return AgentTrack(
        id=agent_id,
        category=category,
        positions=path[:steps],
        headings=np.full(steps, heading),
        timestamps=times[:steps],
        valid=np.ones(steps, dtype=bool),
        is_target=is_target,
        future_gt=path[steps:],
    )


@pytest.fixture
def tiny_cfg() -> RunConfig:
    return tiny_config()


@pytest.fixture
def store() -> ParameterStore:
    return ParameterStore(rng_seed=0, dtype="float64")


@pytest.fixture
def tiny_scene(tiny_cfg) -> Scene:
    return generate_synthetic_scene(3, tiny_cfg.generator_config())


@pytest.fixture
def tiny_scenes(tiny_cfg) -> list[Scene]:
    return generate_scenes(4, seed=11, cfg=tiny_cfg.generator_config())


@pytest.fixture
def simple_scene() -> Scene:
    """Two lanes, two moving targets and one parked agent."""
    return Scene(
        scenario_id="simple",
        polygons=(
            straight_lane("lane-0", (0.0, 0.0), (40.0, 0.0)),
            straight_lane("lane-1", (0.0, 4.0), (40.0, 4.0)),
        ),
        agents=(
            straight_track("a", (2.0, 0.0), (5.0, 0.0)),
            straight_track("b", (10.0, 4.0), (3.0, 0.0)),
            straight_track("c", (20.0, -3.0), (0.0, 0.0), is_target=False),
        ),
        horizon=6,
    )


@pytest.fixture
def tmp_dir():
    """Provide a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as d:
        yield d
