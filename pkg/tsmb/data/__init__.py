"""Dataset ingestion, folds and synthetic data."""

from tsmb.data.dataset import (
    DataFormat,
    Dataset,
    LabeledSeries,
    load_dataset,
    load_ucr,
    save_csv,
    stratified_kfold,
    znormalize,
)

__all__ = [
    "DataFormat",
    "Dataset",
    "LabeledSeries",
    "load_dataset",
    "load_ucr",
    "save_csv",
    "stratified_kfold",
    "znormalize",
]
