"""
Scene Files

JSON-lines scene format, one scenario per line:

    {scenario_id, polygons: [{id, kind, points, headings}],
     agents: [{id, category, positions, headings, timestamps, valid,
               is_target, future_gt?}]}

Floats are written with their shortest round-trip representation, so a
write followed by a read reproduces every 64-bit value exactly. Unobserved
positions (NaN at invalid steps) are written as null.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from jointcast_core.errors import GeometryError, SceneParseError, SceneValidationError
from scene_model.types import (
    DEFAULT_HORIZON,
    AgentCategory,
    AgentTrack,
    MapPolygon,
    PolygonKind,
    Scene,
)

logger = logging.getLogger(__name__)

Point = tuple[Optional[float], Optional[float]]


class PolygonRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    kind: PolygonKind
    points: list[tuple[float, float]]
    headings: list[float]


class AgentRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    category: AgentCategory
    positions: list[Point]
    headings: list[Optional[float]]
    timestamps: list[float]
    valid: list[bool]
    is_target: bool
    future_gt: Optional[list[tuple[float, float]]] = None


class SceneRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario_id: str
    polygons: list[PolygonRecord]
    agents: list[AgentRecord]


def _points_out(array: np.ndarray) -> list[Point]:
    return [
        (None if math.isnan(x) else float(x), None if math.isnan(y) else float(y))
        for x, y in array.tolist()
    ]


def _points_in(points: list[Point]) -> np.ndarray:
    return np.array(
        [[math.nan if v is None else v for v in point] for point in points], dtype=np.float64
    ).reshape(-1, 2)


def _values_out(array: np.ndarray) -> list[Optional[float]]:
    return [None if math.isnan(v) else float(v) for v in array.tolist()]


def _values_in(values: list[Optional[float]]) -> np.ndarray:
    return np.array([math.nan if v is None else v for v in values], dtype=np.float64)


def scene_to_record(scene: Scene) -> SceneRecord:
    return SceneRecord(
        scenario_id=scene.scenario_id,
        polygons=[
            PolygonRecord(
                id=p.id,
                kind=p.kind,
                points=[tuple(point) for point in p.centerline.tolist()],
                headings=p.headings.tolist(),
            )
            for p in scene.polygons
        ],
        agents=[
            AgentRecord(
                id=a.id,
                category=a.category,
                positions=_points_out(a.positions),
                headings=_values_out(a.headings),
                timestamps=a.timestamps.tolist(),
                valid=a.valid.tolist(),
                is_target=a.is_target,
                future_gt=None if a.future_gt is None else [tuple(p) for p in a.future_gt.tolist()],
            )
            for a in scene.agents
        ],
    )


def record_to_scene(record: SceneRecord, horizon: Optional[int] = None) -> Scene:
    """
    Build a Scene from a parsed record.

    The horizon is taken from the targets' future_gt when present, else from
    the argument, else the default of 60 steps.
    """
    agents = tuple(
        AgentTrack(
            id=a.id,
            category=a.category,
            positions=_points_in(a.positions),
            headings=_values_in(a.headings),
            timestamps=np.array(a.timestamps, dtype=np.float64),
            valid=np.array(a.valid, dtype=bool),
            is_target=a.is_target,
            future_gt=None if a.future_gt is None else np.array(a.future_gt).reshape(-1, 2),
        )
        for a in record.agents
    )
    polygons = tuple(
        MapPolygon(
            id=p.id,
            kind=p.kind,
            centerline=np.array(p.points, dtype=np.float64).reshape(-1, 2),
            headings=np.array(p.headings, dtype=np.float64),
        )
        for p in record.polygons
    )
    lengths = {a.future_gt.shape[0] for a in agents if a.future_gt is not None}
    if len(lengths) > 1:
        raise SceneValidationError(
            "Agents disagree on future length",
            scenario_id=record.scenario_id,
            lengths=sorted(lengths),
        )
    resolved = lengths.pop() if lengths else (horizon or DEFAULT_HORIZON)
    return Scene(record.scenario_id, polygons, agents, horizon=resolved)


def write_scenes(scenes: Iterable[Scene], path: str | Path) -> Path:
    """Write scenes as JSON lines; an empty iterable yields an empty file."""
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out_path.open("w", encoding="utf-8") as f:
        for scene in scenes:
            f.write(scene_to_record(scene).model_dump_json(exclude_none=True))
            f.write("\n")
            count += 1
    logger.info(f"Wrote {count} scenes to {out_path}")
    return out_path


def read_scenes(
    path: str | Path,
    require_futures: bool = False,
    horizon: Optional[int] = None,
) -> list[Scene]:
    """
    Read a JSON-lines scene file.

    Args:
        path: File to read
        require_futures: Training-mode read; every target must carry future_gt
        horizon: Horizon for scenes without futures (prediction-mode reads)

    Returns:
        Scenes in file order

    Raises:
        SceneParseError: On a malformed record, with its 1-based line number
        SceneValidationError: On well-formed records violating scene rules
        GeometryError: On degenerate polygons
    """
    in_path = Path(path)
    scenes: list[Scene] = []
    with in_path.open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = SceneRecord.model_validate_json(line)
            except ValidationError as e:
                raise SceneParseError(
                    f"Malformed scene record: {e.error_count()} errors, first: "
                    f"{e.errors()[0]['msg']}",
                    line=line_no,
                    path=str(in_path),
                ) from e
            try:
                scene = record_to_scene(record, horizon)
                if require_futures:
                    scene.require_futures()
            except (SceneValidationError, GeometryError) as e:
                raise type(e)(e.message, line=line_no, **e.extra) from e
            scenes.append(scene)
    logger.debug(f"Read {len(scenes)} scenes from {in_path}")
    return scenes
