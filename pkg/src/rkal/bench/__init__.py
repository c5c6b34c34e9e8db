"""Benchmark harness for the accuracy and lid-driven cavity experiments."""

from .runner import (
    COLUMNS,
    ErrorTracker,
    ResultRow,
    RunConfig,
    compute_errors,
    csv_text,
    emit_results,
    parse_config,
    run,
    run_accuracy,
    run_cavity,
)

__all__ = [
    "COLUMNS",
    "ErrorTracker",
    "ResultRow",
    "RunConfig",
    "compute_errors",
    "csv_text",
    "emit_results",
    "parse_config",
    "run",
    "run_accuracy",
    "run_cavity",
]
