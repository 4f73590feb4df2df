"""Structural and content diversity metrics over run records."""

from .coverage import (
    CoverageReport,
    coverage_report,
    live_state_coverage,
    path_coverage,
    state_coverage,
    transition_coverage,
)
from .report import csv_rows, efficiency, evaluate, tokens_per_second
from .text import KernelParams, distinct_n, vendi_score, wd_shift_gram, wd_shift_kernel

__all__ = [
    "CoverageReport",
    "KernelParams",
    "coverage_report",
    "csv_rows",
    "distinct_n",
    "efficiency",
    "evaluate",
    "live_state_coverage",
    "path_coverage",
    "state_coverage",
    "tokens_per_second",
    "transition_coverage",
    "vendi_score",
    "wd_shift_gram",
    "wd_shift_kernel",
]
