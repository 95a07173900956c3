"""Datasets, runs and artifacts for the four experiments."""

from .config import ConfigError, ExperimentConfig
from .datasets import ExperimentData, SplitData, build_dataset
from .runner import RunResult, baseline_classifiers, run_experiment
from .store import StoreError, load_dataset, load_model, save_dataset, save_model

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentData",
    "RunResult",
    "SplitData",
    "StoreError",
    "baseline_classifiers",
    "build_dataset",
    "load_dataset",
    "load_model",
    "run_experiment",
    "save_dataset",
    "save_model",
]
