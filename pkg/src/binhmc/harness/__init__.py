"""Experiment configuration, runners and the command line."""
from .config import ConfigError, ExperimentConfig, parse_config
from .experiments import ess_sweep, run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "ess_sweep", "parse_config", "run_experiment"]
