"""
Harness

Orchestration around the model: the forecaster bundle, training loop,
prediction files, baselines, invariance audits and the jointcast CLI.
"""

from harness.baselines import constant_velocity
from harness.invariance import InvarianceReport, InvarianceResult, check_invariance
from harness.model import ForwardPass, JointForecaster, local_targets
from harness.predictions import (
    PredictionRecord,
    prediction_worlds,
    read_predictions,
    record_to_worlds,
    worlds_to_record,
    write_predictions,
)
from harness.trainer import Trainer, TrainingResult

__all__ = [
    "ForwardPass",
    "InvarianceReport",
    "InvarianceResult",
    "JointForecaster",
    "PredictionRecord",
    "Trainer",
    "TrainingResult",
    "check_invariance",
    "constant_velocity",
    "local_targets",
    "prediction_worlds",
    "read_predictions",
    "record_to_worlds",
    "worlds_to_record",
    "write_predictions",
]
