"""Benchmark reports: accuracy and timing tables, rank correlations, report files.

Files written by ``write_reports`` into the output directory:

- ``report.json``: every EvalReport plus the run configuration; no
  wall-clock values, so a fixed seed gives a byte-identical file.
- ``accuracy.csv``: one row per dataset, accuracy and chosen
  hyperparameters per scheme.
- ``cv.csv``: mean and per-fold validation accuracy of every grid point.
- ``timings.csv``: average seconds and optimiser iterations per trained
  model, by scheme and model size.
- ``correlations.csv``: Spearman correlations between schemes across
  datasets (only with two or more datasets).
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy.stats import rankdata, spearmanr

from tsmb.core.entities import SCHEMES, EvalReport, SchemeId, TimingRecord
from tsmb.data.io import atomic_write_text
from tsmb.exceptions import ReportError

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
TIMING_COLUMNS = ["scheme", "size", "models", "mean_seconds", "mean_iterations"]


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation; tied values share their average rank."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ReportError(
            f"spearman needs two vectors of equal length, got {x.shape} and {y.shape}"
        )
    if x.size < 2:
        raise ReportError("spearman needs at least 2 values")
    if np.ptp(rankdata(x)) == 0 or np.ptp(rankdata(y)) == 0:
        raise ReportError("spearman correlation is undefined for constant input")
    return float(spearmanr(x, y)[0])


def timing_report(records: Sequence[TimingRecord]) -> pd.DataFrame:
    """Average training time and iterations per (scheme, model size)."""
    if not records:
        return pd.DataFrame(columns=TIMING_COLUMNS)
    df = pd.DataFrame([r.model_dump() for r in records])
    table = (
        df.groupby(["scheme", "size"], sort=True)
        .agg(
            models=("seconds", "size"),
            mean_seconds=("seconds", "mean"),
            mean_iterations=("iterations", "mean"),
        )
        .reset_index()
    )
    return table[TIMING_COLUMNS]


def _scheme_order(reports: Sequence[EvalReport]) -> list[SchemeId]:
    present = {r.scheme for r in reports}
    return [s for s in SCHEMES if str(s) in present]


def accuracy_table(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """One row per dataset with accuracy and chosen hyperparameters per scheme."""
    schemes = _scheme_order(reports)
    show_range = any(r.reruns > 1 for r in reports)
    rows: dict[str, dict[str, Any]] = {}
    for report in reports:
        row = rows.setdefault(
            report.dataset, {"dataset": report.dataset, "classes": report.n_classes}
        )
        title = SchemeId.parse(report.scheme).title
        row[f"{title} accuracy"] = report.test_accuracy
        if show_range:
            row[f"{title} min"] = report.test_accuracy_min
            row[f"{title} max"] = report.test_accuracy_max
        row[f"{title} hpar"] = report.chosen_label

    columns = ["dataset", "classes"]
    for scheme in schemes:
        columns.append(f"{scheme.title} accuracy")
        if show_range:
            columns += [f"{scheme.title} min", f"{scheme.title} max"]
        columns.append(f"{scheme.title} hpar")
    return pd.DataFrame(list(rows.values()), columns=columns)


def cv_table(reports: Sequence[EvalReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        for cv in report.cv:
            row: dict[str, Any] = {
                "dataset": report.dataset,
                "scheme": report.scheme,
                "hyperparams": cv.label,
                "mean_accuracy": cv.mean_accuracy,
                "failures": sum(cv.fold_failures),
            }
            for fold, accuracy in enumerate(cv.fold_accuracies):
                row[f"fold_{fold}"] = accuracy
            rows.append(row)
    return pd.DataFrame(rows)


def correlation_matrix(columns: Mapping[str, Sequence[float]], strict: bool = True) -> pd.DataFrame:
    """Pairwise Spearman correlations; undefined pairs raise, or become NaN unless ``strict``."""
    names = list(columns)
    matrix = np.eye(len(names))
    for i, a in enumerate(names):
        for j in range(i + 1, len(names)):
            b = names[j]
            try:
                value = spearman(columns[a], columns[b])
            except ReportError as exc:
                if strict:
                    raise ReportError(f"{a} vs {b}: {exc}") from exc
                value = math.nan
            matrix[i, j] = matrix[j, i] = value
    return pd.DataFrame(matrix, index=names, columns=names)


def _accuracy_columns(reports: Sequence[EvalReport]) -> dict[str, list[float]]:
    datasets = sorted({r.dataset for r in reports})
    columns: dict[str, list[float]] = {}
    for scheme in _scheme_order(reports):
        by_dataset = {r.dataset: r.test_accuracy for r in reports if r.scheme == str(scheme)}
        if set(by_dataset) == set(datasets):
            columns[scheme.title] = [by_dataset[d] for d in datasets]
    return columns


def _write_csv(df: pd.DataFrame, path: Path, index: bool = False) -> Path:
    return atomic_write_text(path, df.to_csv(index=index, lineterminator="\n"))


def write_reports(
    reports: Sequence[EvalReport],
    output_dir: Path | str,
    config: Mapping[str, Any] | None = None,
) -> list[Path]:
    """Write the report files listed in the module docstring; returns their paths."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": dict(config or {}),
        "reports": [r.model_dump(mode="json") for r in reports],
    }
    written = [
        atomic_write_text(out / REPORT_FILE, json.dumps(payload, indent=2, sort_keys=True) + "\n"),
        _write_csv(accuracy_table(reports), out / "accuracy.csv"),
        _write_csv(cv_table(reports), out / "cv.csv"),
        _write_csv(timing_report([t for r in reports for t in r.timings]), out / "timings.csv"),
    ]
    if len({r.dataset for r in reports}) >= 2:
        columns = _accuracy_columns(reports)
        if len(columns) >= 2:
            matrix = correlation_matrix(columns, strict=False)
            if matrix.isna().to_numpy().any():
                logger.warning("Some scheme correlations are undefined (constant accuracies)")
            written.append(_write_csv(matrix, out / "correlations.csv", index=True))
    logger.info("Wrote %d report files to %s", len(written), out)
    return written


def load_reports(path: Path | str) -> list[EvalReport]:
    source = Path(path)
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
        return [EvalReport.model_validate(r) for r in data["reports"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
        raise ReportError(f"{source}: not a benchmark report ({exc})") from exc


def _report_name(path: Path, taken: set[str]) -> str:
    base = path.parent.name if path.name == REPORT_FILE and path.parent.name else path.stem
    name, n = base, 2
    while name in taken:
        name = f"{base}#{n}"
        n += 1
    taken.add(name)
    return name


def compare_reports(paths: Sequence[Path | str]) -> pd.DataFrame:
    """Spearman matrix between every (report, scheme) accuracy vector across datasets.

    All columns must cover the same datasets; a mismatch raises ReportError
    naming the differing datasets.
    """
    taken: set[str] = set()
    columns: dict[str, dict[str, float]] = {}
    for path in map(Path, paths):
        name = _report_name(path, taken)
        for report in load_reports(path):
            key = f"{name}:{report.scheme}"
            columns.setdefault(key, {})[report.dataset] = report.test_accuracy
    if len(columns) < 2:
        raise ReportError("need at least two accuracy columns to compare")

    reference_key = next(iter(columns))
    reference = set(columns[reference_key])
    for key, values in columns.items():
        if set(values) != reference:
            missing = sorted(reference - set(values))
            extra = sorted(set(values) - reference)
            raise ReportError(
                f"dataset lists differ: {key} lacks {missing} and adds {extra} "
                f"relative to {reference_key}"
            )
    datasets = sorted(reference)
    return correlation_matrix({k: [v[d] for d in datasets] for k, v in columns.items()})


def write_comparison(matrix: pd.DataFrame, path: Path | str) -> Path:
    return _write_csv(matrix, Path(path), index=True)
