"""
Scene Data Model

Immutable containers for map polygons, agent tracks and scenes. Arrays are
coerced to float64 on construction and validated once; downstream code
relies on the invariants checked here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from jointcast_core.errors import GeometryError, SceneValidationError

STEP_SECONDS = 0.1
DEFAULT_HORIZON = 60
_STEP_TOLERANCE = 1e-6


class PolygonKind(str, Enum):
    LANE = "lane"
    CROSSWALK = "crosswalk"


class AgentCategory(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"


def _frozen_array(value: object, dtype: type = np.float64) -> np.ndarray:
    array = np.array(value, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MapPolygon:
    """
    A lane or crosswalk as an ordered centerline with per-point headings.

    Attributes:
        id: Polygon identifier, unique within a scene
        kind: Lane or crosswalk
        centerline: [P, 2] points in meters, P >= 2
        headings: [P] radians
    """

    id: str
    kind: PolygonKind
    centerline: np.ndarray
    headings: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PolygonKind(self.kind))
        centerline = _frozen_array(self.centerline)
        headings = _frozen_array(self.headings)
        object.__setattr__(self, "centerline", centerline)
        object.__setattr__(self, "headings", headings)

        if centerline.ndim != 2 or centerline.shape[1] != 2:
            raise GeometryError(
                f"Centerline must have shape [P, 2], got {centerline.shape}", polygon=self.id
            )
        if centerline.shape[0] < 2:
            raise GeometryError("Polygon needs at least 2 points", polygon=self.id)
        if headings.shape != (centerline.shape[0],):
            raise GeometryError(
                f"Expected {centerline.shape[0]} headings, got {headings.shape}", polygon=self.id
            )
        if not (np.all(np.isfinite(centerline)) and np.all(np.isfinite(headings))):
            raise GeometryError("Polygon has non-finite values", polygon=self.id)
        steps = np.linalg.norm(np.diff(centerline, axis=0), axis=-1)
        if np.any(steps == 0.0):
            raise GeometryError(
                "Consecutive centerline points coincide",
                polygon=self.id,
                index=int(np.argmax(steps == 0.0)),
            )

    @property
    def num_points(self) -> int:
        return int(self.centerline.shape[0])


@dataclass(frozen=True, eq=False)
class AgentTrack:
    """
    Observed history of one agent and, for training data, its future.

    Attributes:
        positions: [T, 2] meters; finite where valid
        headings: [T] radians
        timestamps: [T] seconds, strictly increasing by STEP_SECONDS
        valid: bool [T]
        future_gt: [T', 2] meters or None
    """

    id: str
    category: AgentCategory
    positions: np.ndarray
    headings: np.ndarray
    timestamps: np.ndarray
    valid: np.ndarray
    is_target: bool = False
    future_gt: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", AgentCategory(self.category))
        object.__setattr__(self, "is_target", bool(self.is_target))
        positions = _frozen_array(self.positions)
        headings = _frozen_array(self.headings)
        timestamps = _frozen_array(self.timestamps)
        valid = _frozen_array(self.valid, dtype=bool)
        for name, value in (
            ("positions", positions),
            ("headings", headings),
            ("timestamps", timestamps),
            ("valid", valid),
        ):
            object.__setattr__(self, name, value)

        steps = timestamps.shape[0] if timestamps.ndim == 1 else -1
        if positions.shape != (steps, 2) or headings.shape != (steps,) or valid.shape != (steps,):
            raise SceneValidationError(
                "Track arrays disagree on history length",
                agent=self.id,
                positions=positions.shape,
                headings=headings.shape,
                timestamps=timestamps.shape,
                valid=valid.shape,
            )
        if steps < 1:
            raise SceneValidationError("Track has no observed steps", agent=self.id)
        if not valid.any():
            raise SceneValidationError("Track has no valid step", agent=self.id)
        if steps > 1 and not np.allclose(
            np.diff(timestamps), STEP_SECONDS, rtol=0.0, atol=_STEP_TOLERANCE
        ):
            raise SceneValidationError(
                f"Timestamps must advance by {STEP_SECONDS} s", agent=self.id
            )
        if not (
            np.all(np.isfinite(positions[valid]))
            and np.all(np.isfinite(headings[valid]))
            and np.all(np.isfinite(timestamps))
        ):
            raise SceneValidationError("Non-finite state at a valid step", agent=self.id)

        if self.future_gt is not None:
            future = _frozen_array(self.future_gt)
            if future.ndim != 2 or future.shape[1] != 2 or not np.all(np.isfinite(future)):
                raise SceneValidationError(
                    f"future_gt must be a finite [T', 2] array, got {future.shape}",
                    agent=self.id,
                )
            object.__setattr__(self, "future_gt", future)

    @property
    def num_steps(self) -> int:
        return int(self.timestamps.shape[0])


@dataclass(frozen=True, eq=False)
class Scene:
    """
    The unit of prediction: map polygons, agent histories and target set.

    Every agent shares the same history length. The target set A' is the
    agents flagged is_target, in agent order.
    """

    scenario_id: str
    polygons: tuple[MapPolygon, ...]
    agents: tuple[AgentTrack, ...]
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self) -> None:
        object.__setattr__(self, "polygons", tuple(self.polygons))
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.scenario_id:
            raise SceneValidationError("Scene has no scenario_id")
        if not self.agents:
            raise SceneValidationError("Scene has no agents", scenario_id=self.scenario_id)
        if not any(agent.is_target for agent in self.agents):
            raise SceneValidationError(
                "Scene needs at least one target agent", scenario_id=self.scenario_id
            )
        lengths = {agent.num_steps for agent in self.agents}
        if len(lengths) != 1:
            raise SceneValidationError(
                "Agents disagree on history length",
                scenario_id=self.scenario_id,
                lengths=sorted(lengths),
            )
        agent_ids = [agent.id for agent in self.agents]
        polygon_ids = [polygon.id for polygon in self.polygons]
        if len(set(agent_ids)) != len(agent_ids) or len(set(polygon_ids)) != len(polygon_ids):
            raise SceneValidationError("Duplicate element ids", scenario_id=self.scenario_id)
        for agent in self.agents:
            if agent.future_gt is not None and agent.future_gt.shape[0] != self.horizon:
                raise SceneValidationError(
                    f"future_gt has {agent.future_gt.shape[0]} steps, horizon is {self.horizon}",
                    scenario_id=self.scenario_id,
                    agent=agent.id,
                )

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @property
    def num_polygons(self) -> int:
        return len(self.polygons)

    @property
    def history_steps(self) -> int:
        return self.agents[0].num_steps

    @property
    def target_indices(self) -> np.ndarray:
        return np.array([i for i, a in enumerate(self.agents) if a.is_target], dtype=np.int64)

    @property
    def target_ids(self) -> list[str]:
        return [a.id for a in self.agents if a.is_target]

    def has_futures(self) -> bool:
        return all(a.future_gt is not None for a in self.agents if a.is_target)

    def require_futures(self) -> None:
        """
        Raises:
            SceneValidationError: If a target agent has no future_gt
        """
        missing = [a.id for a in self.agents if a.is_target and a.future_gt is None]
        if missing:
            raise SceneValidationError(
                "Target agents without future_gt",
                scenario_id=self.scenario_id,
                agents=missing,
            )

    def target_futures(self) -> np.ndarray:
        """Ground-truth futures of the targets, [A', T', 2]."""
        self.require_futures()
        return np.stack([a.future_gt for a in self.agents if a.is_target])  # type: ignore[misc]
