"""Experiment runner, sweeps, reports and the CLI."""

from .config import ExperimentConfig, SweepSpec, load_config
from .report import compare_report
from .runner import run_experiment, run_sweep

__all__ = ["ExperimentConfig", "SweepSpec", "load_config", "compare_report", "run_experiment", "run_sweep"]
