"""Data ingestion, experiment configuration, reference optima, and the CLI."""

from .config import ConfigError, ExperimentConfig, load_config
from .datasets import Dataset, LibsvmParseError, parse_libsvm, write_libsvm
from .experiment import NumericalError, run_experiment, write_trace_csv
from .reference import ReferenceResult, compute_reference_optimum

__all__ = [
    "Dataset",
    "LibsvmParseError",
    "parse_libsvm",
    "write_libsvm",
    "ExperimentConfig",
    "ConfigError",
    "load_config",
    "ReferenceResult",
    "compute_reference_optimum",
    "run_experiment",
    "write_trace_csv",
    "NumericalError",
]
