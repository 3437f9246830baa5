"""Experiment configuration, orchestration and the command-line interface."""
from .config import ConfigError, ExperimentConfig, from_dict, load_config
from .report import compare_report
from .runner import run

__all__ = ["ConfigError", "ExperimentConfig", "compare_report", "from_dict", "load_config", "run"]
