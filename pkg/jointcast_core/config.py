"""
Run Configuration

Model, training, generation and evaluation hyperparameters. Values come
from a JSON file mirroring the field names, with CLI overrides on top.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from jointcast_core.errors import ConfigurationError
from jointcast_core.settings import Precision, settings


class GeneratorConfig(BaseModel):
    """Synthetic scene generation settings."""

    min_lanes: int = Field(default=2, ge=1, description="Minimum lane count")
    max_lanes: int = Field(default=8, ge=1, description="Maximum lane count")
    max_crosswalks: int = Field(default=2, ge=0, description="Maximum crosswalk count")
    min_agents: int = Field(default=2, ge=1, description="Minimum agent count")
    max_agents: int = Field(default=10, ge=1, description="Maximum agent count")
    agents_per_lane: int = Field(default=5, ge=1, description="Lane capacity")
    history_steps: int = Field(default=50, ge=2, description="Observed steps T")
    future_steps: int = Field(default=60, ge=1, description="Forecast horizon T'")
    lane_length: float = Field(default=200.0, gt=0.0, description="Lane length in meters")
    lane_spacing: float = Field(default=1.0, gt=0.0, description="Centerline point spacing")
    max_curvature: float = Field(default=0.01, ge=0.0, description="Arc lane curvature bound")
    arc_fraction: float = Field(default=0.5, ge=0.0, le=1.0, description="Share of arc lanes")
    min_speed: float = Field(default=2.0, ge=0.0, description="Minimum moving speed (m/s)")
    max_speed: float = Field(default=12.0, ge=0.0, description="Maximum moving speed (m/s)")
    static_fraction: float = Field(
        default=0.2, ge=0.0, le=1.0, description="Share of parked agents"
    )
    accel_noise: float = Field(default=0.3, ge=0.0, description="Acceleration noise std (m/s^2)")
    lead_follow_fraction: float = Field(
        default=0.5, ge=0.0, le=1.0, description="Chance an agent joins an occupied lane"
    )
    follow_gap: float = Field(default=10.0, gt=0.0, description="Initial lead-follow gap (m)")
    min_gap: float = Field(default=2.0, gt=1.0, description="Enforced lead-follow gap (m)")
    spawn_extent: float = Field(default=40.0, ge=0.0, description="Lane origin spread (m)")

    @model_validator(mode="after")
    def _check_feasible(self) -> "GeneratorConfig":
        if self.min_lanes > self.max_lanes:
            raise ValueError("min_lanes exceeds max_lanes")
        if self.min_agents > self.max_agents:
            raise ValueError("min_agents exceeds max_agents")
        if self.min_speed > self.max_speed:
            raise ValueError("min_speed exceeds max_speed")
        return self


class LossWeights(BaseModel):
    """Multipliers of the three loss terms (the plain sum by default)."""

    propose: float = 1.0
    refine: float = 1.0
    cls: float = 1.0


class RunConfig(BaseModel):
    """
    Complete configuration of a jointcast run.

    Defaults are the full-scale values; desk-scale runs shrink hidden_dim,
    epochs and scene counts through the config file or CLI flags.
    """

    # Model
    hidden_dim: int = Field(default=128, ge=1, description="Hidden units D")
    num_heads: int = Field(default=8, ge=1, description="Attention heads H")
    num_modes: int = Field(default=6, ge=1, description="Joint modes K")
    encoder_layers: int = Field(default=2, ge=1, description="Encoder blocks L_enc")
    decoder_layers: int = Field(default=2, ge=1, description="Decoder stacks L_dec")
    recurrent_steps: int = Field(default=3, ge=1, description="Proposal recurrences")
    chunk_steps: int = Field(default=20, ge=1, description="Steps emitted per recurrence")
    history_steps: int = Field(default=50, ge=2, description="Observed steps T")
    future_steps: int = Field(default=60, ge=1, description="Forecast horizon T'")
    num_freq_bands: int = Field(default=8, ge=1, description="Fourier bands per descriptor")
    activation: str = Field(default="gelu", description="Nonlinearity of every MLP")
    per_mode_pool_query: bool = Field(default=False, description="One pooling query per mode")
    map_knn: int = Field(default=8, ge=1, description="Map-map neighbors")
    map_radius: float = Field(default=50.0, gt=0.0, description="Agent-map radius (m)")
    social_radius: float = Field(default=50.0, gt=0.0, description="Agent-agent radius (m)")
    knn_fallback: int = Field(default=8, ge=1, description="Neighbors when radius is empty")
    precision: Precision = Field(default_factory=lambda: settings.JOINTCAST_PRECISION)

    # Training
    epochs: int = Field(default=50, ge=0)
    batch_size: int = Field(default=32, ge=1, description="Scenes per optimizer step")
    lr: float = Field(default=5e-4, gt=0.0)
    weight_decay: float = Field(default=0.1, ge=0.0)
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    loss_weights: LossWeights = Field(default_factory=LossWeights)
    seed: int = Field(default_factory=lambda: settings.JOINTCAST_SEED)
    model_seed: int = Field(default=0, description="Parameter initialization seed")

    # Data
    num_train: int = Field(default=200, ge=0)
    num_val: int = Field(default=50, ge=0)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)

    # Evaluation and ensembling
    miss_threshold: float = Field(default=2.0, gt=0.0)
    collision_radius: float = Field(default=2.0, gt=0.0)
    ensemble_iters: int = Field(default=50, ge=1)
    invariance_tolerance: float = Field(default=1e-4, gt=0.0)

    # Paths
    train_path: str = "data/train.jsonl"
    val_path: str = "data/val.jsonl"
    out_dir: str = "runs/default"

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.recurrent_steps * self.chunk_steps != self.future_steps:
            raise ValueError(
                f"recurrent_steps * chunk_steps ({self.recurrent_steps} x {self.chunk_steps}) "
                f"must equal future_steps ({self.future_steps})"
            )
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError(
                f"num_heads ({self.num_heads}) must divide hidden_dim ({self.hidden_dim})"
            )
        return self

    @property
    def dtype(self) -> str:
        return self.precision.value

    def generator_config(self) -> GeneratorConfig:
        """Generator settings with the run's history and horizon lengths."""
        return self.generator.model_copy(
            update={"history_steps": self.history_steps, "future_steps": self.future_steps}
        )


def build_run_config(values: dict[str, Any]) -> RunConfig:
    """
    Validate raw values into a RunConfig.

    Raises:
        ConfigurationError: If any field is invalid or inconsistent
    """
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid run configuration: {e}") from e


def load_run_config(
    path: Optional[str | Path] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> RunConfig:
    """
    Load a RunConfig from a JSON file and apply overrides.

    Args:
        path: JSON file mirroring RunConfig field names; falls back to
              JOINTCAST_CONFIG_FILE, then to defaults
        overrides: Values that replace file values (CLI flags); None entries
                   are ignored

    Returns:
        Validated RunConfig

    Raises:
        ConfigurationError: If the file is unreadable or values are invalid
    """
    if path is None and settings.JOINTCAST_CONFIG_FILE:
        path = settings.JOINTCAST_CONFIG_FILE

    values: dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        try:
            values = json.loads(config_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot load run config: {e}", path=str(config_path)) from e
        if not isinstance(values, dict):
            raise ConfigurationError("Run config must be a JSON object", path=str(config_path))

    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return build_run_config(values)
