"""
Invariance Audit

Checks the symmetries the model is built to respect. Each check re-runs a
scene under a symmetry action and measures how far the outputs move:

- rigid: a random rotation and translation; encodings and pi must not
  change, world-frame trajectories must move with the scene
- time_shift: every timestamp shifted by a constant; nothing may change
- permutation: agents and polygons reordered; outputs must be reordered
  the same way

Deviations are max |a - b| / max(1, max |a|) over all compared arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from core_math.tensor import no_grad
from harness.model import JointForecaster
from jointcast_core.logging import get_component_logger
from scene_model.geometry import permute_scene, transform_points, transform_scene
from scene_model.types import Scene

logger = get_component_logger("harness.invariance")

FAMILIES = ("rigid", "time_shift", "permutation")
MAX_TRANSLATION = 100.0
MAX_TIME_SHIFT = 1000.0


@dataclass
class SceneOutputs:
    """Model outputs of one scene, as float64 arrays keyed by agent id order."""

    map_enc: np.ndarray  # [M, D]
    agent_enc: np.ndarray  # [A, T, D]
    proposal: np.ndarray  # [K, A', T', 2] world
    refined: np.ndarray  # [K, A', T', 2] world
    pi: np.ndarray  # [K]
    agent_ids: list[str]
    target_ids: list[str]


@dataclass
class InvarianceResult:
    """Worst deviation of one invariance family against its tolerance."""

    passed: bool
    family: str
    max_deviation: float
    tolerance: float
    trials: int
    message: str = ""


@dataclass
class InvarianceReport:
    results: list[InvarianceResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def result(self, family: str) -> InvarianceResult:
        return next(r for r in self.results if r.family == family)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "family": r.family,
                    "max_deviation": r.max_deviation,
                    "tolerance": r.tolerance,
                    "trials": r.trials,
                    "passed": r.passed,
                }
                for r in self.results
            ]
        )


def relative_deviation(reference: np.ndarray, candidate: np.ndarray) -> float:
    reference = np.asarray(reference, dtype=np.float64)
    candidate = np.asarray(candidate, dtype=np.float64)
    if reference.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(reference))))
    return float(np.max(np.abs(reference - candidate))) / scale


def scene_outputs(model: JointForecaster, scene: Scene) -> SceneOutputs:
    """Run the model in eval mode without a graph and collect every audited output."""
    model.eval()
    with no_grad():
        result = model.forward(scene)
    prediction = result.output.to_prediction(scene, result.encoding.frames)
    return SceneOutputs(
        map_enc=result.encoding.map_enc.data.astype(np.float64),
        agent_enc=result.encoding.agent_enc.data.astype(np.float64),
        proposal=prediction.proposal_traj,
        refined=prediction.refined_traj,
        pi=result.scores.pi,
        agent_ids=[a.id for a in scene.agents],
        target_ids=scene.target_ids,
    )


def _worst(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    return max(relative_deviation(a, b) for a, b in pairs)


def rigid_deviation(
    model: JointForecaster, scene: Scene, theta: float, translation: Sequence[float]
) -> float:
    """Deviation after rotating by theta and translating the whole scene."""
    base = scene_outputs(model, scene)
    moved = scene_outputs(model, transform_scene(scene, theta=theta, translation=translation))
    return _worst(
        [
            (base.map_enc, moved.map_enc),
            (base.agent_enc, moved.agent_enc),
            (base.pi, moved.pi),
            (transform_points(base.proposal, theta, translation), moved.proposal),
            (transform_points(base.refined, theta, translation), moved.refined),
        ]
    )


def time_shift_deviation(model: JointForecaster, scene: Scene, shift: float) -> float:
    base = scene_outputs(model, scene)
    shifted = scene_outputs(model, transform_scene(scene, time_shift=shift))
    return _worst(
        [
            (base.map_enc, shifted.map_enc),
            (base.agent_enc, shifted.agent_enc),
            (base.pi, shifted.pi),
            (base.proposal, shifted.proposal),
            (base.refined, shifted.refined),
        ]
    )


def permutation_deviation(
    model: JointForecaster,
    scene: Scene,
    agent_order: Sequence[int],
    polygon_order: Sequence[int],
) -> float:
    """Deviation after reordering agents and polygons, compared in the new order."""
    base = scene_outputs(model, scene)
    permuted = scene_outputs(model, permute_scene(scene, agent_order, polygon_order))
    target_order = [base.target_ids.index(i) for i in permuted.target_ids]
    return _worst(
        [
            (base.map_enc[list(polygon_order)], permuted.map_enc),
            (base.agent_enc[list(agent_order)], permuted.agent_enc),
            (base.pi, permuted.pi),
            (base.proposal[:, target_order], permuted.proposal),
            (base.refined[:, target_order], permuted.refined),
        ]
    )


def _audit_family(
    family: str,
    scenes: Sequence[Scene],
    trials: int,
    tolerance: float,
    trial: Callable[[Scene, np.random.Generator], float],
    rng: np.random.Generator,
) -> InvarianceResult:
    worst = 0.0
    for scene in scenes:
        for _ in range(trials):
            worst = max(worst, trial(scene, rng))
    passed = worst <= tolerance
    message = "" if passed else f"max deviation {worst:.3e} exceeds {tolerance:.1e}"
    log = logger.info if passed else logger.warning
    log(f"Invariance family '{family}': max deviation {worst:.3e} (tolerance {tolerance:.1e})")
    return InvarianceResult(
        passed=passed,
        family=family,
        max_deviation=worst,
        tolerance=tolerance,
        trials=trials * len(scenes),
        message=message,
    )


def check_invariance(
    model: JointForecaster,
    scenes: Sequence[Scene],
    trials: int = 1,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> InvarianceReport:
    """
    Audit every invariance family over scenes with random symmetry actions.

    Rigid motions rotate uniformly and translate up to 100 m; time shifts
    reach 1000 s in either direction.
    """
    rng = np.random.default_rng(seed)

    def rigid(scene: Scene, rng: np.random.Generator) -> float:
        theta = float(rng.uniform(-np.pi, np.pi))
        angle = rng.uniform(-np.pi, np.pi)
        radius = MAX_TRANSLATION * np.sqrt(rng.uniform())
        translation = (float(radius * np.cos(angle)), float(radius * np.sin(angle)))
        return rigid_deviation(model, scene, theta, translation)

    def time_shift(scene: Scene, rng: np.random.Generator) -> float:
        shift = float(rng.uniform(-MAX_TIME_SHIFT, MAX_TIME_SHIFT))
        return time_shift_deviation(model, scene, shift)

    def permutation(scene: Scene, rng: np.random.Generator) -> float:
        return permutation_deviation(
            model,
            scene,
            rng.permutation(scene.num_agents).tolist(),
            rng.permutation(scene.num_polygons).tolist(),
        )

    checks = {"rigid": rigid, "time_shift": time_shift, "permutation": permutation}
    return InvarianceReport(
        [_audit_family(f, scenes, trials, tolerance, checks[f], rng) for f in FAMILIES]
    )
