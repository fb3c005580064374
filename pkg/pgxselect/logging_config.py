"""Logging configuration with structured logging support."""

import logging
import sys
import time

from pythonjsonlogger.json import JsonFormatter

from pgxselect.config import get_settings


def setup_logging(level: str | None = None) -> None:
    """Configure structured logging with JSON format.

    Args:
        level: Override for the configured log level (e.g. from ``--log-level``)
    """
    settings = get_settings()
    log_level = (level or settings.log_level).upper()

    # Configure root logger
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Remove existing handlers
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)

    formatter = JsonFormatter(
        "%(asctime)s %(name)s %(levelname)s %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%SZ",
    )
    formatter.converter = time.gmtime
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    # Set log level for specific loggers
    logging.getLogger("jax").setLevel(logging.WARNING)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    logging.info(
        "Logging configured",
        extra={"log_level": log_level.lower(), "environment": settings.app_env},
    )
