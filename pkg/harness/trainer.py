"""
Trainer

Runs the optimization loop: per epoch, shuffled scenes are grouped into
batches whose per-scene gradients are averaged before one AdamW step at
the epoch's cosine-annealed learning rate. Every step is logged to a CSV
training log and every epoch ends with a checkpoint.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from core_math.optim import AdamW, cosine_lr
from core_math.tensor import no_grad
from harness.model import JointForecaster
from jointcast_core.config import RunConfig
from jointcast_core.errors import InputError, NumericError
from jointcast_core.logging import get_component_logger
from scene_model.types import Scene

logger = get_component_logger("harness.trainer")

LOG_COLUMNS = ["epoch", "step", "l_propose", "l_refine", "l_cls", "total", "lr"]
INITIAL_CHECKPOINT = "initial.jckpt"
LATEST_CHECKPOINT = "latest.jckpt"
TRAINING_LOG = "training_log.csv"


def epoch_checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:03d}.jckpt"


@dataclass
class TrainingResult:
    """
    Outcome of a training run.

    Tracks how far training got, the first and last logged losses, every
    checkpoint written, and wall time.
    """

    epochs_completed: int
    initial_loss: float
    final_loss: float
    log_path: Path
    checkpoints: list[Path] = field(default_factory=list)
    duration_ms: float = 0.0

    @property
    def latest_checkpoint(self) -> Optional[Path]:
        return self.checkpoints[-1] if self.checkpoints else None


class Trainer:
    """
    Sequential trainer with gradient accumulation.

    Scenes are ragged, so a batch is a loop over scenes; batch_size is the
    number of scenes whose gradients are averaged per optimizer step.
    """

    def __init__(
        self,
        cfg: RunConfig,
        model: Optional[JointForecaster] = None,
        out_dir: Optional[str | Path] = None,
    ) -> None:
        self.cfg = cfg
        self.model = model or JointForecaster(cfg)
        self.out_dir = Path(out_dir or cfg.out_dir)
        self.optimizer = AdamW()
        self._rng = np.random.default_rng(cfg.seed)
        self._rows: list[dict[str, float]] = []

    @property
    def log_path(self) -> Path:
        return self.out_dir / TRAINING_LOG

    def learning_rate(self, epoch: int) -> float:
        return cosine_lr(epoch, self.cfg.epochs, self.cfg.lr)

    def batches(self, scenes: Sequence[Scene]) -> list[list[Scene]]:
        order = self._rng.permutation(len(scenes))
        size = self.cfg.batch_size
        return [[scenes[i] for i in order[j : j + size]] for j in range(0, len(order), size)]

    def train_step(self, batch: Sequence[Scene], lr: float) -> dict[str, float]:
        """
        One accumulated optimizer step over a batch.

        Returns:
            Batch-mean loss terms

        Raises:
            NumericError: If a loss term or gradient is not finite
        """
        store = self.model.store
        store.zero_grad()
        self.model.train()
        scale = 1.0 / len(batch)
        sums = {"l_propose": 0.0, "l_refine": 0.0, "l_cls": 0.0, "total": 0.0}
        for scene in batch:
            breakdown = self.model.loss(scene)
            breakdown.objective.backward(np.asarray(scale, dtype=store.dtype))
            sums["l_propose"] += breakdown.l_propose
            sums["l_refine"] += breakdown.l_refine
            sums["l_cls"] += breakdown.l_cls
            sums["total"] += breakdown.total
        store.fill_missing_grads()
        if not all(np.all(np.isfinite(p.grad)) for _, p in store.items()):
            raise NumericError("Non-finite gradient", stage="backward")
        self.optimizer.step(store, lr, self.cfg.weight_decay)
        return {name: value * scale for name, value in sums.items()}

    def evaluate_loss(self, scenes: Sequence[Scene]) -> float:
        """Mean total loss over scenes with dropout off and no graph."""
        if not scenes:
            return math.nan
        self.model.eval()
        with no_grad():
            totals = [self.model.loss(scene).total for scene in scenes]
        return math.fsum(totals) / len(totals)

    def _write_log(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(self._rows, columns=LOG_COLUMNS)
        frame.to_csv(self.log_path, index=False, float_format="%.17g")

    def fit(self, scenes: Sequence[Scene]) -> TrainingResult:
        """
        Train for cfg.epochs epochs.

        Checkpoints initial.jckpt before the first step, then
        epoch_XXX.jckpt and latest.jckpt after each epoch.

        Raises:
            InputError: If there are no training scenes
            NumericError: On a non-finite loss; latest.jckpt keeps the last
                          completed epoch
        """
        if not scenes:
            raise InputError("Training requires at least one scene")
        for scene in scenes:
            scene.require_futures()

        start = time.perf_counter()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        checkpoints = [self.model.save(self.out_dir / INITIAL_CHECKPOINT)]
        self.model.save(self.out_dir / LATEST_CHECKPOINT)
        logger.info(
            f"Training on {len(scenes)} scenes for {self.cfg.epochs} epochs "
            f"({len(self.model.store)} parameters, {self.model.store.num_values} values)"
        )

        step = 0
        epochs_completed = 0
        for epoch in range(self.cfg.epochs):
            lr = self.learning_rate(epoch)
            for batch in self.batches(scenes):
                try:
                    terms = self.train_step(batch, lr)
                except NumericError as e:
                    self._write_log()
                    logger.error(
                        f"Aborting at epoch {epoch} step {step}: {e}; "
                        f"last good checkpoint is {self.out_dir / LATEST_CHECKPOINT}"
                    )
                    raise NumericError(
                        f"Training diverged: {e.message}",
                        stage=e.stage,
                        epoch=epoch,
                        step=step,
                        checkpoint=str(self.out_dir / LATEST_CHECKPOINT),
                    ) from e
                self._rows.append({"epoch": epoch, "step": step, **terms, "lr": lr})
                logger.debug(f"epoch={epoch} step={step} total={terms['total']:.6f} lr={lr:.3e}")
                step += 1

            checkpoints.append(self.model.save(self.out_dir / epoch_checkpoint_name(epoch)))
            self.model.save(self.out_dir / LATEST_CHECKPOINT)
            self._write_log()
            epochs_completed = epoch + 1
            epoch_rows = [r["total"] for r in self._rows if r["epoch"] == epoch]
            logger.info(
                f"Epoch {epoch + 1}/{self.cfg.epochs} done: "
                f"mean loss {math.fsum(epoch_rows) / len(epoch_rows):.6f}, lr {lr:.3e}"
            )

        self._write_log()
        result = TrainingResult(
            epochs_completed=epochs_completed,
            initial_loss=self._rows[0]["total"] if self._rows else math.nan,
            final_loss=self._rows[-1]["total"] if self._rows else math.nan,
            log_path=self.log_path,
            checkpoints=checkpoints,
            duration_ms=(time.perf_counter() - start) * 1000,
        )
        logger.info(
            f"Training finished: {result.epochs_completed} epochs, "
            f"loss {result.initial_loss:.6f} -> {result.final_loss:.6f} "
            f"in {result.duration_ms / 1000:.1f}s"
        )
        return result
