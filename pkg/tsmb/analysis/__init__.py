"""Benchmark reporting."""

from tsmb.analysis.report import (
    accuracy_table,
    compare_reports,
    correlation_matrix,
    spearman,
    timing_report,
    write_reports,
)

__all__ = [
    "accuracy_table",
    "compare_reports",
    "correlation_matrix",
    "spearman",
    "timing_report",
    "write_reports",
]
