"""
Prediction Files

JSON-lines prediction format, one scenario per line:

    {scenario_id, pi: [K], agents: [{id, modes: [K][T'][2]}]}

Positions are world-frame meters. Records are validated on read and on
construction so every file the harness emits satisfies the same rules it
enforces on input.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from decoder.joint import JointPrediction
from ensemble.scene import WorldSet
from jointcast_core.errors import SceneParseError, SceneValidationError

logger = logging.getLogger(__name__)

PI_TOLERANCE = 1e-6


class AgentModes(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    modes: list[list[tuple[float, float]]]


class PredictionRecord(BaseModel):
    """One scenario's K scored joint worlds."""

    model_config = ConfigDict(extra="forbid")

    scenario_id: str
    pi: list[float]
    agents: list[AgentModes]

    @model_validator(mode="after")
    def _check_layout(self) -> "PredictionRecord":
        modes = len(self.pi)
        if modes == 0:
            raise ValueError("pi must list at least one world")
        if any(p < 0.0 for p in self.pi) or abs(sum(self.pi) - 1.0) > PI_TOLERANCE:
            raise ValueError(f"pi must be a distribution (sums to {sum(self.pi)})")
        if not self.agents:
            raise ValueError("at least one agent is required")
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        lengths = set()
        for agent in self.agents:
            if len(agent.modes) != modes:
                raise ValueError(f"agent '{agent.id}' has {len(agent.modes)} modes, pi has {modes}")
            lengths.update(len(m) for m in agent.modes)
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError(f"all modes must share one non-zero horizon, got {sorted(lengths)}")
        return self

    @property
    def num_modes(self) -> int:
        return len(self.pi)


def worlds_to_record(worlds: WorldSet) -> PredictionRecord:
    """Serialize a scored world set; scores must already be a distribution."""
    traj = np.asarray(worlds.traj, dtype=np.float64)
    return PredictionRecord(
        scenario_id=worlds.scenario_id,
        pi=[float(p) for p in worlds.scores],
        agents=[
            AgentModes(id=agent_id, modes=traj[:, i].tolist())
            for i, agent_id in enumerate(worlds.agent_ids)
        ],
    )


def prediction_worlds(prediction: JointPrediction) -> WorldSet:
    """Refined worlds of a decoded prediction, scored by pi."""
    return WorldSet(
        scenario_id=prediction.scenario_id,
        agent_ids=list(prediction.agent_ids),
        traj=prediction.refined_traj,
        scores=prediction.pi,
    )


def record_to_worlds(record: PredictionRecord) -> WorldSet:
    traj = np.asarray([a.modes for a in record.agents], dtype=np.float64)
    return WorldSet(
        scenario_id=record.scenario_id,
        agent_ids=[a.id for a in record.agents],
        traj=np.swapaxes(traj, 0, 1),
        scores=np.asarray(record.pi, dtype=np.float64),
    )


def write_predictions(records: Iterable[PredictionRecord], path: str | Path) -> Path:
    """Write records one per line, in the given order."""
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out_path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(record.model_dump_json())
            f.write("\n")
            count += 1
    logger.info(f"Wrote {count} predictions to {out_path}")
    return out_path


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    """
    Read and validate a prediction file.

    Raises:
        SceneParseError: On a malformed record, with its 1-based line number
        SceneValidationError: If a scenario id repeats
    """
    in_path = Path(path)
    records: list[PredictionRecord] = []
    seen: set[str] = set()
    with in_path.open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = PredictionRecord.model_validate_json(line)
            except ValidationError as e:
                raise SceneParseError(
                    f"Malformed prediction record: {e.errors()[0]['msg']}",
                    line=line_no,
                    path=str(in_path),
                ) from e
            if record.scenario_id in seen:
                raise SceneValidationError(
                    "Duplicate scenario in prediction file",
                    scenario_id=record.scenario_id,
                    line=line_no,
                )
            seen.add(record.scenario_id)
            records.append(record)
    logger.debug(f"Read {len(records)} predictions from {in_path}")
    return records
