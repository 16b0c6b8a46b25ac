"""
Baselines

Reference predictors that need no parameters, used to judge whether a
trained model has learned anything beyond extrapolation.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ensemble.scene import WorldSet
from scene_model.types import STEP_SECONDS, Scene


def _last_velocity(positions: np.ndarray, timestamps: np.ndarray, valid: np.ndarray) -> np.ndarray:
    steps = np.flatnonzero(valid)
    if steps.size < 2:
        return np.zeros(2)
    last, prev = steps[-1], steps[-2]
    return (positions[last] - positions[prev]) / (timestamps[last] - timestamps[prev])


def constant_velocity(scene: Scene, horizon: Optional[int] = None) -> WorldSet:
    """
    One world in which every target keeps its last observed velocity.

    The velocity comes from the two most recent valid steps; an agent seen
    only once stays put.
    """
    horizon = horizon or scene.horizon
    offsets = STEP_SECONDS * np.arange(1, horizon + 1)
    futures = []
    for agent in scene.agents:
        if not agent.is_target:
            continue
        last = np.flatnonzero(agent.valid)[-1]
        velocity = _last_velocity(agent.positions, agent.timestamps, agent.valid)
        elapsed = agent.timestamps[-1] - agent.timestamps[last] + offsets
        futures.append(agent.positions[last] + elapsed[:, None] * velocity)
    return WorldSet(
        scenario_id=scene.scenario_id,
        agent_ids=scene.target_ids,
        traj=np.stack(futures)[None],
        scores=np.ones(1),
    )
