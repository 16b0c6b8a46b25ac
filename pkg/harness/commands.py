"""
Commands

One function per CLI subcommand. Each takes a validated RunConfig plus the
paths it operates on, writes its artifacts, and returns an in-memory
result so tests and scripts can call it without going through argparse.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from core_math.gradcheck import finite_diff_check
from ensemble.scene import WorldSet, ensemble_scene, gather_inputs
from harness.baselines import constant_velocity
from harness.invariance import InvarianceReport, check_invariance
from harness.model import JointForecaster
from harness.predictions import (
    prediction_worlds,
    read_predictions,
    record_to_worlds,
    worlds_to_record,
    write_predictions,
)
from harness.trainer import Trainer, TrainingResult
from jointcast_core.config import RunConfig
from jointcast_core.errors import InputError, NumericError, SceneValidationError
from jointcast_core.logging import get_component_logger
from jointcast_core.settings import Precision
from metrics.forecasting import MetricReport, ScenarioForecast, build_report
from scene_model.generator import generate_scenes, generate_synthetic_scene
from scene_model.io import read_scenes, write_scenes

logger = get_component_logger("harness.commands")

GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_MODEL = {
    "hidden_dim": 16,
    "num_heads": 2,
    "num_modes": 3,
    "encoder_layers": 1,
    "decoder_layers": 1,
    "recurrent_steps": 2,
    "chunk_steps": 3,
    "history_steps": 6,
    "future_steps": 6,
    "num_freq_bands": 2,
    "dropout": 0.0,
    "precision": Precision.FLOAT64,
}
GRADCHECK_SCENE = {
    "min_lanes": 2,
    "max_lanes": 2,
    "max_crosswalks": 0,
    "min_agents": 2,
    "max_agents": 2,
    "static_fraction": 0.0,
    "lane_length": 40.0,
    "lane_spacing": 4.0,
}


# --- Data ---


def cmd_gen_data(cfg: RunConfig, out_dir: Optional[str | Path] = None) -> tuple[Path, Path]:
    """
    Generate train and validation scene files.

    Validation scenes use seed + 1 so the two splits never share a scene.
    With out_dir the files are named train.jsonl and val.jsonl inside it;
    otherwise cfg.train_path and cfg.val_path are used.
    """
    if out_dir is not None:
        train_path, val_path = Path(out_dir) / "train.jsonl", Path(out_dir) / "val.jsonl"
    else:
        train_path, val_path = Path(cfg.train_path), Path(cfg.val_path)
    generator = cfg.generator_config()
    write_scenes(generate_scenes(cfg.num_train, cfg.seed, generator, prefix="train"), train_path)
    write_scenes(generate_scenes(cfg.num_val, cfg.seed + 1, generator, prefix="val"), val_path)
    logger.info(f"Generated {cfg.num_train} train and {cfg.num_val} val scenes")
    return train_path, val_path


# --- Training and inference ---


def cmd_train(
    cfg: RunConfig,
    scenes_path: Optional[str | Path] = None,
    out_dir: Optional[str | Path] = None,
) -> TrainingResult:
    scenes = read_scenes(scenes_path or cfg.train_path, require_futures=True)
    return Trainer(cfg, out_dir=out_dir).fit(scenes)


def cmd_predict(
    cfg: RunConfig,
    checkpoint: str | Path,
    scenes_path: str | Path,
    out_path: str | Path,
) -> Path:
    """
    Write scored joint worlds for every scene, in scene-file order.

    Raises:
        CheckpointError: If the checkpoint does not fit the configuration
    """
    model = JointForecaster.from_checkpoint(cfg, checkpoint).eval()
    scenes = read_scenes(scenes_path, horizon=cfg.future_steps)
    records = [worlds_to_record(prediction_worlds(model.predict(scene))) for scene in scenes]
    return write_predictions(records, out_path)


def cmd_baseline(cfg: RunConfig, scenes_path: str | Path, out_path: str | Path) -> Path:
    """Write constant-velocity predictions, one world per scene, in scene-file order."""
    scenes = read_scenes(scenes_path, horizon=cfg.future_steps)
    records = [worlds_to_record(constant_velocity(scene, cfg.future_steps)) for scene in scenes]
    logger.info(f"Wrote constant-velocity predictions for {len(records)} scenes")
    return write_predictions(records, out_path)


# --- Evaluation ---


def _align(worlds: WorldSet, target_ids: list[str]) -> np.ndarray:
    if sorted(worlds.agent_ids) != sorted(target_ids):
        raise SceneValidationError(
            "Prediction agents do not match the scene's target agents",
            scenario_id=worlds.scenario_id,
            expected=target_ids,
            got=worlds.agent_ids,
        )
    return worlds.traj[:, [worlds.agent_ids.index(a) for a in target_ids]]


def cmd_eval(
    cfg: RunConfig,
    predictions_path: str | Path,
    scenes_path: str | Path,
    out_path: Optional[str | Path] = None,
) -> MetricReport:
    """
    Score predictions against scenes with futures.

    Raises:
        SceneValidationError: If any scene has no prediction (all missing ids
                              are listed)
    """
    scenes = read_scenes(scenes_path, require_futures=True)
    predictions = {r.scenario_id: record_to_worlds(r) for r in read_predictions(predictions_path)}
    missing = [s.scenario_id for s in scenes if s.scenario_id not in predictions]
    if missing:
        raise SceneValidationError("Scenes without predictions", missing=missing)

    forecasts = []
    for scene in scenes:
        worlds = predictions[scene.scenario_id]
        forecasts.append(
            ScenarioForecast(
                scenario_id=scene.scenario_id,
                traj=_align(worlds, scene.target_ids),
                pi=worlds.scores,
                gt=scene.target_futures(),
            )
        )
    report = build_report(forecasts, cfg.miss_threshold, cfg.collision_radius)
    if out_path is not None:
        report.to_csv(out_path)
        logger.info(f"Wrote metric report for {len(forecasts)} scenarios to {out_path}")
    return report


def cmd_ensemble(
    cfg: RunConfig,
    prediction_paths: Sequence[str | Path],
    out_path: str | Path,
    weights: Optional[Sequence[float]] = None,
) -> Path:
    """
    Merge several prediction files into one with cfg.num_modes worlds per scene.

    Each member's pi is scaled by its weight (1 by default) before
    clustering.

    Raises:
        InputError: If weights do not match the file count
        SceneValidationError: If the files cover different scenarios
    """
    weights = list(weights) if weights is not None else [1.0] * len(prediction_paths)
    if not prediction_paths or len(weights) != len(prediction_paths) or min(weights) <= 0.0:
        raise InputError(
            "Ensembling needs one positive weight per prediction file",
            files=len(prediction_paths),
            weights=len(weights),
        )

    grouped: dict[str, list[WorldSet]] = defaultdict(list)
    order: list[str] = []
    for path, weight in zip(prediction_paths, weights):
        for record in read_predictions(path):
            worlds = record_to_worlds(record)
            if record.scenario_id not in grouped:
                order.append(record.scenario_id)
            grouped[record.scenario_id].append(
                WorldSet(worlds.scenario_id, worlds.agent_ids, worlds.traj, worlds.scores * weight)
            )
    incomplete = [s for s in order if len(grouped[s]) != len(prediction_paths)]
    if incomplete:
        raise SceneValidationError("Scenarios missing from some prediction files", ids=incomplete)

    records = []
    for scenario_id in order:
        merged = ensemble_scene(
            gather_inputs(grouped[scenario_id]),
            k=cfg.num_modes,
            iters=cfg.ensemble_iters,
            seed=cfg.seed,
        )
        records.append(worlds_to_record(merged))
    logger.info(f"Ensembled {len(prediction_paths)} files over {len(records)} scenarios")
    return write_predictions(records, out_path)


# --- Audits ---


def cmd_check_invariance(
    cfg: RunConfig,
    checkpoint: str | Path,
    scenes_path: str | Path,
    trials: int = 1,
    out_path: Optional[str | Path] = None,
) -> InvarianceReport:
    """
    Run the invariance audit and optionally write its CSV.

    Raises:
        NumericError: If any family exceeds cfg.invariance_tolerance
    """
    model = JointForecaster.from_checkpoint(cfg, checkpoint)
    scenes = read_scenes(scenes_path, horizon=cfg.future_steps)
    report = check_invariance(
        model, scenes, trials=trials, tolerance=cfg.invariance_tolerance, seed=cfg.seed
    )
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        report.to_frame().to_csv(out_path, index=False, float_format="%.6g")
    if not report.passed:
        failed = {r.family: r.max_deviation for r in report.results if not r.passed}
        raise NumericError("Invariance audit failed", stage="invariance", deviations=failed)
    return report


def gradcheck_config(cfg: RunConfig) -> RunConfig:
    """A tiny 64-bit variant of cfg for finite differences."""
    generator = cfg.generator.model_copy(update=GRADCHECK_SCENE)
    return cfg.model_copy(update={**GRADCHECK_MODEL, "generator": generator})


def cmd_gradcheck(cfg: RunConfig, max_coords: int = 3) -> float:
    """
    Finite-difference check of the total loss on a generated 2-agent scene.

    Every parameter is checked at up to max_coords coordinates.

    Raises:
        NumericError: If the worst relative error exceeds 1e-4
    """
    small = gradcheck_config(cfg)
    scene = generate_synthetic_scene(cfg.seed, small.generator_config())
    model = JointForecaster(small).eval()
    params = [p for _, p in model.store.items()]
    error = finite_diff_check(
        lambda: model.loss(scene).objective, params, max_coords=max_coords, seed=cfg.seed
    )
    logger.info(f"End-to-end gradcheck over {len(params)} parameters: max rel. error {error:.3e}")
    if error > GRADCHECK_TOLERANCE:
        raise NumericError(
            f"Gradient check failed: {error:.3e} > {GRADCHECK_TOLERANCE}", stage="gradcheck"
        )
    return error
