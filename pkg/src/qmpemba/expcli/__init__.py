"""Declarative experiment runner: configs, validation, execution and the command line."""

from .config import ConfigError, ExperimentConfig, bundled_configs, load_config, validate
from .runner import run

__all__ = ["ConfigError", "ExperimentConfig", "bundled_configs", "load_config", "run", "validate"]
