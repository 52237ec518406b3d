"""
Logging configuration for the WaDeNet package.

This module provides centralized logging configuration and utilities
for consistent logging across the library and the CLI. Console output
goes to stderr: stdout is reserved for machine-readable results.
"""

import logging
from pathlib import Path
from typing import Optional, Dict, Any
import yaml
import sys
from datetime import datetime, timezone

from src.exceptions import ConfigurationError

LOGGER_NAME = "wadenet"
CONSOLE_HANDLER = "wadenet-console"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def load_config(config_path: str = "config/wadenet_config.yaml", profile: str = "default") -> dict:
    """Load a settings profile from a YAML file"""
    try:
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigurationError(f"Failed to load config file: {str(e)}", {"config_path": config_path})
    if not isinstance(config, dict):
        raise ConfigurationError("Invalid config file format", {"config_path": config_path})
    if profile not in config:
        raise ConfigurationError(f"Profile '{profile}' not found in config file", {"profile": profile})
    return config[profile]


def get_logger(name: str) -> logging.Logger:
    """Child logger under the package logger, e.g. ``wadenet.training_service``."""
    return logging.getLogger(f"{LOGGER_NAME}.{name.rsplit('.', 1)[-1]}")


def setup_logging(
    log_level: str = "INFO",
    log_dir: Optional[str] = None,
    log_format: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
) -> logging.Logger:
    """
    Configure the ``wadenet`` logger: console on stderr, optional log files.

    Safe to call repeatedly; a second call only rebinds the console handler to
    the current stderr and applies the new level.

    Raises:
        ConfigurationError: log_level is not a standard level name
    """
    if not isinstance(log_level, str) or log_level.upper() not in LOG_LEVELS:
        raise ConfigurationError(f"unknown log level {log_level!r}", {"choices": list(LOG_LEVELS)})
    level = getattr(logging, log_level.upper())
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)

    console = next((h for h in logger.handlers if h.get_name() == CONSOLE_HANDLER), None)
    if console is not None:
        console.stream = sys.stderr
        console.setLevel(level)
        return logger

    console = logging.StreamHandler(sys.stderr)
    console.set_name(CONSOLE_HANDLER)
    console.setLevel(level)
    console.setFormatter(logging.Formatter(log_format))
    logger.addHandler(console)

    if log_dir:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)
        for name, file_level in (('info', logging.INFO), ('error', logging.ERROR)):
            file_handler = logging.FileHandler(log_path / f'wadenet_{name}.log', encoding='utf-8')
            file_handler.setLevel(file_level)
            file_handler.setFormatter(logging.Formatter(log_format))
            logger.addHandler(file_handler)

    return logger


def log_epoch_progress(
    logger: logging.Logger,
    epoch: int,
    total_epochs: int,
    lr: float,
    train_loss: float,
    val_acc: float,
    val_f1: float,
    seconds: float,
    level: str = "INFO"
) -> None:
    """
    Log structured per-epoch training information.

    Args:
        logger: Logger instance
        epoch: 0-based epoch index
        total_epochs: Number of epochs in the run
        lr: Learning rate used for the epoch
        train_loss: Mean training loss over the epoch's batches
        val_acc: Validation accuracy after the epoch
        val_f1: Validation macro F1 after the epoch
        seconds: Wall time of the epoch
        level: Log level
    """
    extra = {
        'epoch': epoch,
        'lr': lr,
        'train_loss': train_loss,
        'val_acc': val_acc,
        'val_f1': val_f1,
        'seconds': seconds,
    }

    log_func = getattr(logger, level.lower())
    log_func(
        f"Epoch {epoch + 1}/{total_epochs} - lr: {lr:g}, loss: {train_loss:.4f}, "
        f"val acc: {val_acc:.4f}, val F1: {val_f1:.4f} ({seconds:.1f}s)",
        extra=extra
    )


def log_error(
    logger: logging.Logger,
    error: Exception,
    context: Optional[Dict[str, Any]] = None,
    level: int = logging.ERROR
) -> None:
    """
    Log error with context.

    Args:
        logger: Logger instance
        error: Exception that occurred
        context: Additional context information
        level: Logging level to use (defaults to ERROR)
    """
    error_context = {
        'error_type': error.__class__.__name__,
        'error_message': str(error),
        'timestamp': datetime.now(timezone.utc).isoformat()
    }

    if hasattr(error, 'details'):
        error_context.update(error.details)

    if context:
        error_context.update(context)

    logger.log(level, str(error), extra={'error_context': error_context})
