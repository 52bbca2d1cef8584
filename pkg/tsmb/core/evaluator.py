"""Cross-validated hyperparameter selection and test-set evaluation."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.metrics import accuracy_score

from tsmb.config import ModelConfig, RunConfig
from tsmb.core.classifier import TrainedClassifier, predict, train_classifier
from tsmb.core.entities import CvRow, EvalReport, Hyperparams, SchemeId, TimingRecord
from tsmb.core.seeding import fold_seed, rerun_seed, split_seed
from tsmb.data.dataset import Dataset, LabeledSeries, stratified_kfold
from tsmb.exceptions import DatasetError, PredictionError

logger = logging.getLogger(__name__)

# Stands in for a series whose prediction raised; never equal to a real label.
UNPREDICTED = "\x00unpredicted"


@dataclass
class CvResult:
    chosen: Hyperparams
    rows: list[CvRow]
    timings: list[TimingRecord] = field(default_factory=list)


def _timings(classifier: TrainedClassifier) -> list[TimingRecord]:
    return [
        TimingRecord(
            scheme=str(classifier.scheme),
            size=classifier.hyperparams.size,
            seconds=entry.seconds,
            iterations=entry.iterations,
        )
        for entry in classifier.bank
    ]


def evaluate_test(
    classifier: TrainedClassifier, test: Sequence[LabeledSeries], lenient: bool = False
) -> float:
    """Fraction of ``test`` predicted correctly.

    An unusable classifier scores 0; a series whose prediction fails counts
    as incorrect.
    """
    if not test:
        raise DatasetError("cannot evaluate on an empty test set")
    if not classifier.is_usable(lenient):
        return 0.0
    predicted = []
    for series in test:
        try:
            predicted.append(predict(classifier, series))
        except PredictionError as exc:
            logger.debug("Prediction failed: %s", exc)
            predicted.append(UNPREDICTED)
    return float(accuracy_score([s.label for s in test], predicted))


def _evaluate_fold(
    scheme: SchemeId,
    hyperparams: Hyperparams,
    train_part: list[LabeledSeries],
    val_part: list[LabeledSeries],
    seed: int,
    config: ModelConfig,
    lenient: bool,
) -> tuple[float, int, list[TimingRecord]]:
    classifier = train_classifier(scheme, train_part, hyperparams, seed, config)
    accuracy = evaluate_test(classifier, val_part, lenient=lenient)
    return accuracy, len(classifier.failures), _timings(classifier)


def cross_validate(
    scheme: SchemeId | str,
    train: Sequence[LabeledSeries],
    grid: Sequence[Hyperparams],
    k: int = 3,
    seed: int = 0,
    config: ModelConfig | None = None,
    lenient: bool = False,
    n_jobs: int = 1,
) -> CvResult:
    """Mean k-fold validation accuracy of every grid point.

    A fold where the classifier is unusable (any failed model in strict
    mode) scores 0. The best mean wins; ties go to the smaller model.
    """
    scheme = SchemeId.parse(scheme)
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    config = config or ModelConfig()
    points = sorted(grid, key=lambda p: p.sort_key)
    folds = stratified_kfold(list(train), k=k, seed=split_seed(seed))

    tasks = [
        (point, fold, train_part, val_part)
        for point in points
        for fold, (train_part, val_part) in enumerate(folds)
    ]
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_fold)(
            scheme, point, train_part, val_part, fold_seed(seed, fold), config, lenient
        )
        for point, fold, train_part, val_part in tasks
    )

    rows: list[CvRow] = []
    timings: list[TimingRecord] = []
    for i, point in enumerate(points):
        per_fold = outcomes[i * k : (i + 1) * k]
        accuracies = [acc for acc, _, _ in per_fold]
        for _, _, records in per_fold:
            timings.extend(records)
        rows.append(
            CvRow(
                hyperparams=point.model_dump(mode="json"),
                label=point.label,
                fold_accuracies=accuracies,
                fold_failures=[n for _, n, _ in per_fold],
                mean_accuracy=float(np.mean(accuracies)),
            )
        )

    best = 0
    for i, row in enumerate(rows):
        if row.mean_accuracy > rows[best].mean_accuracy:
            best = i
    logger.info(
        "%s CV: %d grid points x %d folds, best %s (%.4f)",
        scheme,
        len(points),
        k,
        rows[best].label,
        rows[best].mean_accuracy,
    )
    return CvResult(chosen=points[best], rows=rows, timings=timings)


def benchmark_scheme(
    dataset: Dataset, scheme: SchemeId | str, config: RunConfig, seed: int
) -> EvalReport:
    """Cross-validate on the train set, refit the winner on all of it, score the test set."""
    scheme = SchemeId.parse(scheme)
    if not dataset.test:
        raise DatasetError(f"dataset {dataset.name!r} has no test series")
    lenient = config.lenient_failures
    cv = cross_validate(
        scheme,
        dataset.train,
        config.grid.points(scheme),
        k=config.folds,
        seed=seed,
        config=config.models,
        lenient=lenient,
        n_jobs=config.jobs,
    )

    accuracies: list[float] = []
    failures = 0
    timings = list(cv.timings)
    for rerun in range(config.reruns):
        classifier = train_classifier(
            scheme,
            dataset.train,
            cv.chosen,
            rerun_seed(seed, rerun),
            config.models,
            n_jobs=config.jobs,
        )
        accuracies.append(evaluate_test(classifier, dataset.test, lenient=lenient))
        failures += len(classifier.failures)
        timings.extend(_timings(classifier))

    report = EvalReport(
        dataset=dataset.name,
        n_classes=dataset.n_classes,
        scheme=str(scheme),
        cv=cv.rows,
        chosen=cv.chosen.model_dump(mode="json"),
        chosen_label=cv.chosen.label,
        test_accuracy=float(np.mean(accuracies)),
        test_accuracy_min=float(np.min(accuracies)),
        test_accuracy_max=float(np.max(accuracies)),
        reruns=config.reruns,
        test_failures=failures,
        timings=timings,
    )
    logger.info(
        "%s on %s: %s chosen, test accuracy %.4f",
        scheme.title,
        dataset.name,
        report.chosen_label,
        report.test_accuracy,
    )
    return report


def run_benchmark(
    dataset: Dataset,
    config: RunConfig,
    seed: int,
    schemes: Sequence[SchemeId | str] | None = None,
) -> list[EvalReport]:
    """Benchmark every selected scheme on one dataset."""
    selected = [SchemeId.parse(s) for s in schemes] if schemes else config.scheme_ids
    if config.znorm:
        dataset = dataset.znormalized()
    return [benchmark_scheme(dataset, scheme, config, seed) for scheme in selected]
