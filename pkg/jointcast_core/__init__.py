"""
Jointcast Core Layer

Provides settings, run configuration, the error hierarchy and logging
utilities shared by every jointcast package.
"""

from jointcast_core.config import GeneratorConfig, LossWeights, RunConfig, load_run_config
from jointcast_core.errors import (
    CheckpointError,
    ConfigurationError,
    DimensionError,
    DomainError,
    GeometryError,
    InputError,
    JointcastError,
    NumericError,
    SceneParseError,
    SceneValidationError,
    StateError,
)
from jointcast_core.logging import get_component_logger, setup_logging
from jointcast_core.settings import JointcastSettings, Precision, load_settings, settings

__version__ = "0.1.0"

__all__ = [
    # Settings
    "JointcastSettings",
    "Precision",
    "load_settings",
    "settings",
    # Configuration
    "GeneratorConfig",
    "LossWeights",
    "RunConfig",
    "load_run_config",
    # Errors
    "CheckpointError",
    "ConfigurationError",
    "DimensionError",
    "DomainError",
    "GeometryError",
    "InputError",
    "JointcastError",
    "NumericError",
    "SceneParseError",
    "SceneValidationError",
    "StateError",
    # Logging
    "get_component_logger",
    "setup_logging",
]
