"""Labelled univariate time series: loading, folds and normalisation.

Two on-disk formats are supported:

- ``ts``: the sktime-style text format. Header lines start with ``@`` and are
  ignored up to ``@data``; after it every line is ``v1,v2,...,vN:label``.
- ``csv``: one series per row, the label first, then the values.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from tsmb.data.io import atomic_write_text
from tsmb.exceptions import DatasetError, FoldError, ParseError

logger = logging.getLogger(__name__)

# Standard deviations below this are treated as a constant series.
CONSTANT_STD = 1e-12


class DataFormat(str, Enum):
    TS = "ts"
    CSV = "csv"

    @property
    def extension(self) -> str:
        return {"ts": ".ts", "csv": ".csv"}[self.value]


@dataclass(frozen=True)
class LabeledSeries:
    """A finite univariate series of length >= 2 with its class label."""

    values: np.ndarray
    label: str

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size < 2:
            raise DatasetError(f"series must have at least 2 values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise DatasetError("series values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "label", str(self.label))

    @property
    def length(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.length


@dataclass(frozen=True)
class Dataset:
    """Train and test series of one benchmark problem."""

    name: str
    train: tuple[LabeledSeries, ...]
    test: tuple[LabeledSeries, ...] = ()
    classes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        train = tuple(self.train)
        test = tuple(self.test)
        if not train:
            raise DatasetError(f"dataset {self.name!r} has no training series")
        observed = {s.label for s in train} | {s.label for s in test}
        classes = tuple(self.classes) if self.classes else tuple(sorted(observed))
        if not classes:
            raise DatasetError(f"dataset {self.name!r} has no classes")
        unknown = observed - set(classes)
        if unknown:
            raise DatasetError(f"labels {sorted(unknown)} are not among the dataset classes")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", test)
        object.__setattr__(self, "classes", classes)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def znormalized(self) -> Dataset:
        return Dataset(
            name=self.name,
            train=tuple(znormalize(s) for s in self.train),
            test=tuple(znormalize(s) for s in self.test),
            classes=self.classes,
        )


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------


def _parse_values(fields: Iterable[str], line: int, path: str) -> np.ndarray:
    try:
        values = np.array([float(f) for f in fields], dtype=float)
    except ValueError as exc:
        raise ParseError(f"non-numeric value ({exc})", line=line, path=path) from exc
    if not np.all(np.isfinite(values)):
        raise ParseError("series contains NaN or infinite values", line=line, path=path)
    return values


def _make_series(values: np.ndarray, label: str, index: int, line: int, path: str) -> LabeledSeries:
    if values.size < 2:
        raise ParseError(
            f"series {index} has length {values.size}, at least 2 required", line=line, path=path
        )
    return LabeledSeries(values=values, label=label)


def parse_ts(text: str, path: str = "<ts>") -> list[LabeledSeries]:
    """Parse the univariate sktime ``.ts`` format."""
    series: list[LabeledSeries] = []
    in_data = False
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not in_data:
            if line.lower().startswith("@data"):
                in_data = True
            elif not line.startswith("@"):
                raise ParseError("data line before @data", line=number, path=path)
            continue

        body, sep, label = line.rpartition(":")
        if not sep:
            raise ParseError("missing ':' before the class label", line=number, path=path)
        if ":" in body:
            raise ParseError("multivariate series are not supported", line=number, path=path)
        if not label.strip():
            raise ParseError("empty class label", line=number, path=path)
        values = _parse_values(body.split(","), number, path)
        series.append(_make_series(values, label.strip(), len(series), number, path))

    if not series:
        raise DatasetError(f"{path}: no series found")
    return series


def parse_csv(text: str, path: str = "<csv>") -> list[LabeledSeries]:
    """Parse rows of ``label,v1,...,vN``."""
    series: list[LabeledSeries] = []
    for number, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        label = row[0].strip()
        if not label:
            raise ParseError("empty class label", line=number, path=path)
        values = _parse_values((cell.strip() for cell in row[1:]), number, path)
        series.append(_make_series(values, label, len(series), number, path))

    if not series:
        raise DatasetError(f"{path}: no series found")
    return series


def read_series(path: Path | str, fmt: DataFormat | str) -> list[LabeledSeries]:
    """Read one file of series in the given format."""
    source = Path(path)
    text = source.read_text(encoding="utf-8")
    if not text.strip():
        raise DatasetError(f"{source}: file is empty")
    parser = parse_ts if DataFormat(fmt) is DataFormat.TS else parse_csv
    return parser(text, path=str(source))


def load_dataset(
    train_path: Path | str,
    test_path: Path | str,
    fmt: DataFormat | str = DataFormat.TS,
    name: str | None = None,
) -> Dataset:
    """Load a train/test pair; classes are the sorted union of observed labels."""
    train = read_series(train_path, fmt)
    test = read_series(test_path, fmt)
    if name is None:
        stem = Path(train_path).stem
        name = stem[: -len("_TRAIN")] if stem.upper().endswith("_TRAIN") else stem
    dataset = Dataset(name=name, train=tuple(train), test=tuple(test))
    logger.info(
        "Loaded %s: %d train, %d test series, %d classes",
        dataset.name,
        len(dataset.train),
        len(dataset.test),
        dataset.n_classes,
    )
    return dataset


def load_ucr(data_dir: Path | str, name: str, fmt: DataFormat | str = DataFormat.TS) -> Dataset:
    """Load ``<data_dir>/<name>/<name>_TRAIN.<ext>`` and the matching ``_TEST`` file."""
    kind = DataFormat(fmt)
    folder = Path(data_dir) / name
    return load_dataset(
        folder / f"{name}_TRAIN{kind.extension}",
        folder / f"{name}_TEST{kind.extension}",
        kind,
        name=name,
    )


def format_csv(series: Sequence[LabeledSeries]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    for s in series:
        writer.writerow([s.label, *(repr(float(v)) for v in s.values)])
    return buffer.getvalue()


def save_csv(series: Sequence[LabeledSeries], path: Path | str) -> Path:
    """Write series in the csv format; values keep their exact float repr."""
    return atomic_write_text(path, format_csv(series))


# ----------------------------------------------------------------------
# Folds and preprocessing
# ----------------------------------------------------------------------


def stratified_kfold(
    series: Sequence[LabeledSeries], k: int = 3, seed: int = 0
) -> list[tuple[list[LabeledSeries], list[LabeledSeries]]]:
    """Split into ``k`` stratified (train_part, validation_part) pairs.

    Validation parts are disjoint and cover the input. Per-class counts in
    the validation parts differ by at most one, so a class with at least two
    members keeps a member in every training part.
    """
    if k < 2:
        raise FoldError(f"k must be at least 2, got {k}")
    counts = Counter(s.label for s in series)
    singletons = sorted(label for label, count in counts.items() if count < 2)
    if singletons:
        raise FoldError(
            f"class {singletons[0]!r} has a single member and cannot be in every training fold"
        )
    if len(series) < k:
        raise FoldError(f"{len(series)} series cannot be split into {k} folds")

    rng = np.random.default_rng(seed)
    labels = np.array([s.label for s in series])
    # members grouped by class (sorted labels), shuffled within each class,
    # then dealt round-robin so every class is striped across all folds
    order = np.lexsort((rng.permutation(len(series)), labels))
    assignment = np.empty(len(series), dtype=int)
    assignment[order] = np.arange(len(series)) % k

    folds = []
    for fold in range(k):
        val_idx = np.flatnonzero(assignment == fold)
        train_idx = np.flatnonzero(assignment != fold)
        folds.append(([series[i] for i in train_idx], [series[i] for i in val_idx]))
    return folds


def znormalize(series: LabeledSeries) -> LabeledSeries:
    """Zero mean, unit population standard deviation; constant series become zeros."""
    values = series.values
    std = float(np.std(values))
    if std < CONSTANT_STD:
        return LabeledSeries(values=np.zeros_like(values), label=series.label)
    return LabeledSeries(values=(values - np.mean(values)) / std, label=series.label)
