"""Experiment harness: robots x seeded learning runs, CSV and SVG outputs."""

from .config import ConfigError, ExperimentConfig, default_config, dump_config, load_config, parse_config
from .runner import BenchSummary, LearningCurve, run_benchmark, run_experiment, zero_shot_transfer

__all__ = [
    "BenchSummary", "ConfigError", "ExperimentConfig", "LearningCurve", "default_config", "dump_config",
    "load_config", "parse_config", "run_benchmark", "run_experiment", "zero_shot_transfer",
]
