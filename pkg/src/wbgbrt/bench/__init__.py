"""Config-driven benchmark harness and command line."""

from .config import ExperimentConfig, read_config
from .harness import compare, emit_plot_data, load_reports, run_experiment

__all__ = ["ExperimentConfig", "compare", "emit_plot_data", "load_reports", "read_config", "run_experiment"]
