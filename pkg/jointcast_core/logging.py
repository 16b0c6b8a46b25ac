"""
Jointcast Logging Configuration

Provides structured logging setup with console and JSON formats and
component-specific loggers, integrated with the jointcast settings.
"""

import logging
import sys
from typing import Optional

from pythonjsonlogger import jsonlogger


def setup_logging(
    level: Optional[str] = None,
    json_format: Optional[bool] = None,
) -> None:
    """
    Configure jointcast logging.

    Args:
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL).
               If None, uses JOINTCAST_LOG_LEVEL from settings.
        json_format: If True, output structured JSON logs. If None, uses
                     JOINTCAST_LOG_JSON from settings.
    """
    from jointcast_core.settings import settings

    if level is None:
        level = settings.JOINTCAST_LOG_LEVEL
    if json_format is None:
        json_format = settings.JOINTCAST_LOG_JSON

    log_level = getattr(logging, level.upper(), logging.INFO)

    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(log_level)

    if json_format:
        formatter: logging.Formatter = jsonlogger.JsonFormatter(
            "%(asctime)s %(name)s %(levelname)s %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    else:
        formatter = logging.Formatter(
            fmt="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )

    handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Remove existing handlers to avoid duplicates
    root_logger.handlers.clear()
    root_logger.addHandler(handler)


def get_component_logger(component: str) -> logging.LoggerAdapter:
    """
    Get a logger for one pipeline component.

    The returned adapter stamps the component name into every record so
    JSON logs can be filtered per component.

    Args:
        component: Component name (e.g. "encoder", "harness.trainer")

    Returns:
        LoggerAdapter with component context pre-configured
    """
    logger = logging.getLogger(f"jointcast.{component}")
    return logging.LoggerAdapter(logger, {"component": component})
