"""
Jointcast Error Hierarchy

Defines exception classes for structured error handling throughout the
forecasting pipeline. Every error carries the process exit code the CLI
reports for it.
"""

from typing import Any, Optional


class JointcastError(Exception):
    """
    Base exception for all jointcast errors.

    Extra keyword arguments are kept on the instance and rendered into the
    message so that log lines carry the offending operand, line or stage.
    """

    exit_code: int = 2

    def __init__(self, message: str, **kwargs: Any):
        self.message = message
        self.extra = kwargs
        super().__init__(message)

    def __str__(self) -> str:
        if self.extra:
            extras = ", ".join(f"{k}={v}" for k, v in self.extra.items())
            return f"{self.message} ({extras})"
        return self.message


class ConfigurationError(JointcastError):
    """
    Configuration error.

    Raised when a run configuration, generator configuration or layer
    configuration is inconsistent (e.g. heads not dividing the hidden size).
    """

    pass


class DimensionError(JointcastError):
    """Operand shapes do not line up."""

    def __init__(self, message: str, operand: str, **kwargs: Any):
        self.operand = operand
        super().__init__(message, operand=operand, **kwargs)


class NumericError(JointcastError):
    """
    Non-finite values or a degenerate numeric state.

    Raised when NaN/Inf show up in inputs, intermediates or losses.
    """

    exit_code = 3

    def __init__(self, message: str, stage: Optional[str] = None, **kwargs: Any):
        self.stage = stage
        if stage is not None:
            kwargs["stage"] = stage
        super().__init__(message, **kwargs)


class StateError(JointcastError):
    """Object used in a state that does not allow the operation."""

    pass


class GeometryError(JointcastError):
    """Degenerate scene geometry (coincident points, empty polylines)."""

    pass


class DomainError(JointcastError):
    """Argument outside the mathematical domain of a function."""

    pass


class InputError(JointcastError):
    """Caller-supplied input is unusable (e.g. fewer points than clusters)."""

    pass


class SceneParseError(JointcastError):
    """
    Malformed record in a JSON-lines file.

    The 1-based line number of the offending record is kept on the error.
    """

    def __init__(self, message: str, line: int, **kwargs: Any):
        self.line = line
        super().__init__(message, line=line, **kwargs)


class SceneValidationError(JointcastError):
    """
    Well-formed data that violates a schema or alignment rule.

    Raised for missing futures on target agents, misaligned agent sets,
    unnormalized scores or missing scenario ids.
    """

    pass


class CheckpointError(ConfigurationError):
    """Checkpoint file unreadable or incompatible with the configuration."""

    pass
