"""Utility modules for the reliable-slicing package."""

from .config import DEFAULT_CONFIG, ExperimentConfig, load_config, save_config
from .seeding import spawn_streams

__all__ = ["DEFAULT_CONFIG", "ExperimentConfig", "load_config", "save_config", "spawn_streams"]
