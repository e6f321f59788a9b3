"""Benchmark harness: configuration, the MBRL loop, reporting and the CLI."""

from .config import DEFAULT_SEEDS, HIDDEN_SIZES, ConfigError, RunConfig, format_config, load_config, parse_config_text
from .report import Summary, emit, learning_curve, mean_stderr, read_records, summarize, summarize_dir
from .runner import BenchmarkResult, EpisodeRecord, NumericalFailure, make_model, run_benchmark, run_seed

__all__ = [
    "BenchmarkResult",
    "ConfigError",
    "DEFAULT_SEEDS",
    "EpisodeRecord",
    "HIDDEN_SIZES",
    "NumericalFailure",
    "RunConfig",
    "Summary",
    "emit",
    "format_config",
    "learning_curve",
    "load_config",
    "make_model",
    "mean_stderr",
    "parse_config_text",
    "read_records",
    "run_benchmark",
    "run_seed",
    "summarize",
    "summarize_dir",
]
