"""
Forecasting Metrics

Multi-world (scene-level) and marginal (per-agent) displacement metrics.

Multi-world metrics score each joint world as a whole: the best world k*
minimizes the final displacement error averaged over target agents, and
actor miss and collision rates are read off that world. Marginal metrics
let every agent pick its own best mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from jointcast_core.errors import SceneValidationError

PI_TOLERANCE = 1e-4
AGGREGATE_ROW = "aggregate"


@dataclass(frozen=True, eq=False)
class ScenarioForecast:
    """Predicted joint worlds of one scenario aligned with its ground truth."""

    scenario_id: str
    traj: np.ndarray  # [K, A', T', 2]
    pi: np.ndarray  # [K]
    gt: np.ndarray  # [A', T', 2]

    def __post_init__(self) -> None:
        traj = np.asarray(self.traj, dtype=np.float64)
        gt = np.asarray(self.gt, dtype=np.float64)
        pi = np.asarray(self.pi, dtype=np.float64)
        object.__setattr__(self, "traj", traj)
        object.__setattr__(self, "gt", gt)
        object.__setattr__(self, "pi", pi)
        if traj.ndim != 4 or traj.shape[1:] != gt.shape:
            raise SceneValidationError(
                f"Trajectories {traj.shape} do not align with ground truth {gt.shape}",
                scenario_id=self.scenario_id,
            )
        if pi.shape != (traj.shape[0],):
            raise SceneValidationError(
                f"pi has shape {pi.shape} for {traj.shape[0]} worlds",
                scenario_id=self.scenario_id,
            )
        if abs(float(pi.sum()) - 1.0) > PI_TOLERANCE or np.any(pi < 0.0):
            raise SceneValidationError(
                f"pi is not normalized (sum {float(pi.sum())})", scenario_id=self.scenario_id
            )

    @property
    def num_modes(self) -> int:
        return int(self.traj.shape[0])

    @property
    def num_agents(self) -> int:
        return int(self.traj.shape[1])


def displacement_errors(traj: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """L2 error per world, agent and step, [K, A', T']."""
    return np.linalg.norm(traj - gt[None], axis=-1)


def colliding_agents(positions: np.ndarray, radius: float) -> np.ndarray:
    """
    Agents of one world that come closer than radius to another agent.

    Args:
        positions: [A', T', 2] predicted positions

    Returns:
        bool [A']
    """
    gaps = np.linalg.norm(positions[:, None] - positions[None], axis=-1)  # [A', A', T']
    close = gaps < radius
    idx = np.arange(positions.shape[0])
    close[idx, idx] = False
    return close.any(axis=(1, 2))


def multiworld_scene(
    forecast: ScenarioForecast, miss_threshold: float = 2.0, collision_radius: float = 2.0
) -> dict[str, float]:
    """Multi-world metric values of one scenario, keyed by unsuffixed name."""
    errors = displacement_errors(forecast.traj, forecast.gt)
    fde = errors[:, :, -1].mean(axis=1)
    ade = errors.mean(axis=(1, 2))
    best = int(np.argmin(fde))
    likely = int(np.argmax(forecast.pi))
    misses = errors[best, :, -1] > miss_threshold
    collisions = colliding_agents(forecast.traj[best], collision_radius)
    return {
        "avgMinFDE": float(fde[best]),
        "avgMinFDE_top1": float(fde[likely]),
        "avgMinADE": float(ade.min()),
        "avgMinADE_top1": float(ade[likely]),
        "actorMR": float(misses.mean()),
        "avgBrierMinFDE": float(fde[best] + (1.0 - forecast.pi[best]) ** 2),
        "actorCR": float(collisions.mean()),
    }


def marginal_scene(forecast: ScenarioForecast, miss_threshold: float = 2.0) -> dict[str, float]:
    """Marginal metric values of one scenario, averaged over its agents."""
    errors = displacement_errors(forecast.traj, forecast.gt)
    fde = errors[:, :, -1]  # [K, A']
    ade = errors.mean(axis=-1)
    best = np.argmin(fde, axis=0)
    agents = np.arange(forecast.num_agents)
    min_fde = fde[best, agents]
    return {
        "minFDE": float(min_fde.mean()),
        "minADE": float(ade.min(axis=0).mean()),
        "MR": float((min_fde > miss_threshold).mean()),
        "b-minFDE": float((min_fde + (1.0 - forecast.pi[best]) ** 2).mean()),
    }


MULTIWORLD_COLUMNS = (
    "avgMinFDE",
    "avgMinFDE_top1",
    "avgMinADE",
    "avgMinADE_top1",
    "actorMR",
    "avgBrierMinFDE",
    "actorCR",
)
MARGINAL_COLUMNS = ("minFDE", "minADE", "MR", "b-minFDE")
TOP1_SUFFIX = "_top1"
ACTOR_WEIGHTED = {"actorMR", "actorCR", "minFDE", "minADE", "MR", "b-minFDE"}


def column_name(metric: str, num_modes: int) -> str:
    """Leaderboard column name: metric_K, except the most-likely-world variants."""
    return metric if metric.endswith(TOP1_SUFFIX) else f"{metric}_{num_modes}"


def _check_modes(forecasts: Sequence[ScenarioForecast]) -> int:
    modes = {f.num_modes for f in forecasts}
    if len(modes) > 1:
        raise SceneValidationError("Scenarios disagree on K", modes=sorted(modes))
    return modes.pop() if modes else 0


def multiworld_metrics(
    forecasts: Sequence[ScenarioForecast],
    miss_threshold: float = 2.0,
    collision_radius: float = 2.0,
) -> list[dict[str, object]]:
    """Per-scenario multi-world rows with K-suffixed column names."""
    modes = _check_modes(forecasts)
    rows: list[dict[str, object]] = []
    for forecast in forecasts:
        values = multiworld_scene(forecast, miss_threshold, collision_radius)
        row: dict[str, object] = {
            "scenario_id": forecast.scenario_id,
            "num_actors": forecast.num_agents,
        }
        row.update({column_name(m, modes): values[m] for m in MULTIWORLD_COLUMNS})
        rows.append(row)
    return rows


def marginal_metrics(
    forecasts: Sequence[ScenarioForecast], miss_threshold: float = 2.0
) -> list[dict[str, object]]:
    """Per-scenario marginal rows with K-suffixed column names."""
    modes = _check_modes(forecasts)
    rows: list[dict[str, object]] = []
    for forecast in forecasts:
        values = marginal_scene(forecast, miss_threshold)
        row: dict[str, object] = {"scenario_id": forecast.scenario_id}
        row.update({column_name(m, modes): values[m] for m in MARGINAL_COLUMNS})
        rows.append(row)
    return rows


class MetricReport:
    """
    Per-scenario metric table with a final aggregate row.

    Scene-level averages aggregate as means over scenarios; actor rates and
    marginal per-agent metrics as means over all actors. Sums are exact
    (math.fsum) so the aggregate does not depend on scenario order.
    """

    def __init__(self, rows: pd.DataFrame, num_modes: int) -> None:
        self.num_modes = num_modes
        self.rows = rows.reset_index(drop=True)
        self.aggregate = self._aggregate()

    def _aggregate(self) -> dict[str, float]:
        if self.rows.empty:
            return {}
        actors = self.rows["num_actors"].to_numpy(dtype=np.float64)
        total_actors = math.fsum(actors)
        out: dict[str, float] = {}
        for column in self.rows.columns:
            if column in ("scenario_id", "num_actors"):
                continue
            values = self.rows[column].to_numpy(dtype=np.float64)
            base = column.rsplit("_", 1)[0]
            if base in ACTOR_WEIGHTED:
                out[column] = math.fsum(values * actors) / total_actors
            else:
                out[column] = math.fsum(values) / len(values)
        out["num_actors"] = total_actors
        return out

    def to_frame(self) -> pd.DataFrame:
        """Scenario rows followed by the aggregate row."""
        aggregate = pd.DataFrame([{"scenario_id": AGGREGATE_ROW, **self.aggregate}])
        if self.rows.empty:
            return aggregate.reindex(columns=["scenario_id"])
        return pd.concat([self.rows, aggregate[self.rows.columns]], ignore_index=True)

    def to_csv(self, path: str | Path) -> Path:
        out_path = Path(path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(out_path, index=False, float_format="%.10g")
        return out_path


def build_report(
    forecasts: Iterable[ScenarioForecast],
    miss_threshold: float = 2.0,
    collision_radius: float = 2.0,
) -> MetricReport:
    """Multi-world and marginal metrics of every scenario in one report."""
    forecasts = list(forecasts)
    modes = _check_modes(forecasts)
    multiworld = pd.DataFrame(multiworld_metrics(forecasts, miss_threshold, collision_radius))
    marginal = pd.DataFrame(marginal_metrics(forecasts, miss_threshold))
    if multiworld.empty:
        return MetricReport(pd.DataFrame(columns=["scenario_id", "num_actors"]), modes)
    rows = multiworld.merge(marginal, on="scenario_id", how="left", validate="one_to_one")
    return MetricReport(rows, modes)
