"""Exception hierarchy for tsmb.

Model training inside a classifier bank never raises: failures are recorded
as values. These exceptions cover bad inputs, broken invariants and IO.
"""

from __future__ import annotations

from typing import Any


class TsmbError(Exception):
    """Base class for all tsmb errors."""


class DatasetError(TsmbError):
    """Invalid dataset content or dataset-level precondition."""


class ParseError(DatasetError):
    """Malformed input line in a dataset file."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        location = ""
        if path is not None:
            location += f"{path}"
        if line is not None:
            location += f":{line}" if location else f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)


class FoldError(DatasetError):
    """Series cannot be split into the requested stratified folds."""


class FuzzyError(TsmbError):
    """Clustering or fuzzification failed."""


class FcmError(TsmbError):
    """Fuzzy cognitive map shape or input error."""


class OptimizationError(TsmbError):
    """Objective returned a non-finite value."""

    def __init__(self, message: str, vector: Any = None):
        self.vector = vector
        super().__init__(message)


class HmmError(TsmbError):
    """Invalid HMM parameters or observations."""


class PredictionError(TsmbError):
    """Classifier has no usable model for a prediction."""


class ReportError(TsmbError):
    """Report assembly or comparison failed."""


class BundleError(TsmbError):
    """Serialized classifier bundle is malformed."""
