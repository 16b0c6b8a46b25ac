"""
Jointcast Settings

Process-level configuration from environment variables and an optional
.env file. Model and training hyperparameters live in RunConfig instead.
"""

from enum import Enum
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Precision(str, Enum):
    """Floating point width used for model parameters and activations."""

    FLOAT32 = "float32"
    FLOAT64 = "float64"


class JointcastSettings(BaseSettings):
    """
    Jointcast process settings.

    Environment variables take precedence over .env values.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    JOINTCAST_LOG_LEVEL: str = Field(
        default="INFO",
        description="Logging level (DEBUG | INFO | WARNING | ERROR | CRITICAL)",
    )
    JOINTCAST_LOG_JSON: bool = Field(
        default=False,
        description="Emit structured JSON log lines",
    )
    JOINTCAST_PRECISION: Precision = Field(
        default=Precision.FLOAT32,
        description="Default parameter precision (float32 | float64)",
    )
    JOINTCAST_CONFIG_FILE: Optional[str] = Field(
        default=None,
        description="Path to a JSON run configuration used when --config is absent",
    )
    JOINTCAST_SEED: int = Field(
        default=0,
        description="Default seed when --seed is absent",
    )


def load_settings() -> JointcastSettings:
    """
    Load jointcast settings from the environment.

    Returns:
        JointcastSettings instance
    """
    return JointcastSettings()


# Module-level singleton
settings = load_settings()
