"""Experiment configs, benchmark registry, sweep runner and reports."""

from .config import ConfigError, ExperimentConfig, load_config, validate_config
from .registry import REGISTRY, Benchmark, list_problems
from .report import ConvergenceReport, RateFit, emit_csv, fit_geometric_rate, read_csv
from .runner import run_experiment

__all__ = [
    "Benchmark", "ConfigError", "ConvergenceReport", "ExperimentConfig", "REGISTRY", "RateFit", "emit_csv",
    "fit_geometric_rate", "list_problems", "load_config", "read_csv", "run_experiment", "validate_config",
]
