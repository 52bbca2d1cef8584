"""Model-bank classifiers: one model per class (1C) or per training series (NN).

HMM banks score a series by forward log-likelihood (higher is better), FCM
banks by one-step prediction MSE of the fuzzified series (lower is better).
1C predicts the class of the best model, NN the label of the owner of the
best per-series model.
"""

from __future__ import annotations

import json
import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from tsmb.config import ModelConfig
from tsmb.core.entities import (
    Family,
    FcmHyperparams,
    Granularity,
    HmmHyperparams,
    Hyperparams,
    Owner,
    SchemeId,
    check_hyperparams,
    hyperparams_from_dict,
)
from tsmb.core.seeding import derive_seed
from tsmb.data.dataset import LabeledSeries
from tsmb.data.io import atomic_write_text
from tsmb.exceptions import BundleError, PredictionError, TsmbError
from tsmb.models.fcm import FcmModel, fcm_prediction_error, train_fcm
from tsmb.models.fuzzy import (
    CentroidSet,
    embed_deltas,
    fcm_cluster,
    fit_shared_centroids,
    fuzzify_series,
)
from tsmb.models.hmm import GaussianHmm, fit_hmm_restarts, forward_log_likelihood

logger = logging.getLogger(__name__)

BUNDLE_VERSION = 1

Model = GaussianHmm | FcmModel


def observations(series: LabeledSeries | np.ndarray, delta: bool = False) -> np.ndarray:
    """HMM observation matrix: raw values as (T, 1), or (value, delta) rows as (T-1, 2)."""
    if delta:
        return embed_deltas(series)
    values = series.values if isinstance(series, LabeledSeries) else np.asarray(series, float)
    return np.asarray(values, dtype=float).reshape(-1, 1)


@dataclass
class BankEntry:
    """A trained model for one owner, or the reason its training failed."""

    owner: Owner
    model: Model | None
    reason: str = ""
    iterations: int = 0
    seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return self.model is None


@dataclass
class TrainedClassifier:
    scheme: SchemeId
    hyperparams: Hyperparams
    classes: tuple[str, ...]
    entries: list[BankEntry] = field(default_factory=list)
    delta_observations: bool = False

    @property
    def bank(self) -> list[BankEntry]:
        return [e for e in self.entries if not e.failed]

    @property
    def failures(self) -> list[tuple[Owner, str]]:
        return [(e.owner, e.reason) for e in self.entries if e.failed]

    def is_usable(self, lenient: bool = False) -> bool:
        """Strict: every model trained. Lenient: at least one model trained.

        A 1C bank is always strict: a class without its model cannot be predicted.
        """
        if lenient and self.scheme.granularity is Granularity.PER_SERIES:
            return bool(self.bank)
        return bool(self.entries) and not self.failures

    def score(self, entry: BankEntry, series: LabeledSeries) -> float:
        if entry.model is None:
            return worst_score(self.scheme.family)
        return score(entry.model, series, delta=self.delta_observations)

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": BUNDLE_VERSION,
            "scheme": str(self.scheme),
            "hyperparams": self.hyperparams.model_dump(mode="json"),
            "classes": list(self.classes),
            "delta_observations": self.delta_observations,
            "entries": [
                {
                    "label": e.owner.label,
                    "index": e.owner.index,
                    "model": None if e.model is None else e.model.to_dict(),
                    "reason": e.reason,
                    "iterations": e.iterations,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainedClassifier:
        try:
            scheme = SchemeId.parse(data["scheme"])
            hyperparams = hyperparams_from_dict(scheme.family, data["hyperparams"])
            model_type = GaussianHmm if scheme.family is Family.HMM else FcmModel
            entries = [
                BankEntry(
                    owner=Owner(str(e["label"]), int(e["index"])),
                    model=None if e["model"] is None else model_type.from_dict(e["model"]),
                    reason=str(e.get("reason", "")),
                    iterations=int(e.get("iterations", 0)),
                )
                for e in data["entries"]
            ]
            return cls(
                scheme=scheme,
                hyperparams=hyperparams,
                classes=tuple(data["classes"]),
                entries=entries,
                delta_observations=bool(data.get("delta_observations", False)),
            )
        except (KeyError, TypeError, ValueError, TsmbError) as exc:
            raise BundleError(f"malformed classifier bundle: {exc}") from exc


def worst_score(family: Family) -> float:
    return -math.inf if family.higher_is_better else math.inf


def score(model: Model, series: LabeledSeries, delta: bool = False) -> float:
    """Log-likelihood for HMMs, prediction MSE for FCMs; errors give the worst score."""
    family = Family.HMM if isinstance(model, GaussianHmm) else Family.FCM
    try:
        if isinstance(model, GaussianHmm):
            value = forward_log_likelihood(model, observations(series, delta))
        else:
            if model.centroids is None:
                return worst_score(family)
            value = fcm_prediction_error(model, [fuzzify_series(series, model.centroids)])
    except TsmbError as exc:
        logger.debug("Scoring failed: %s", exc)
        return worst_score(family)
    if math.isnan(value):
        return worst_score(family)
    return value


def predict(classifier: TrainedClassifier, series: LabeledSeries) -> str:
    """Label of the best-scoring usable model.

    Ties go to the lexicographically smallest label, then the smallest
    owner index.
    """
    bank = classifier.bank
    if not bank:
        raise PredictionError(f"{classifier.scheme} classifier has no usable model")
    sign = -1.0 if classifier.scheme.family.higher_is_better else 1.0

    def key(entry: BankEntry) -> tuple[float, str, int]:
        return (sign * classifier.score(entry, series), entry.owner.label, entry.owner.index)

    return min(bank, key=key).owner.label


# ----------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------


def _owner_groups(
    granularity: Granularity, train: Sequence[LabeledSeries], classes: tuple[str, ...]
) -> list[tuple[Owner, list[LabeledSeries]]]:
    if granularity is Granularity.PER_CLASS:
        return [
            (Owner(label, index), [s for s in train if s.label == label])
            for index, label in enumerate(classes)
        ]
    return [(Owner(s.label, index), [s]) for index, s in enumerate(train)]


def _train_hmm(
    group: list[LabeledSeries], hp: HmmHyperparams, seed: int, config: ModelConfig
) -> tuple[Model | None, str, int]:
    delta = config.hmm.delta_observations
    outcome = fit_hmm_restarts(
        [observations(s, delta) for s in group],
        hp.n_states,
        hp.cov_type,
        n_restarts=config.hmm.n_restarts,
        max_iter=config.hmm.max_iter,
        tol=config.hmm.tol,
        seed=seed,
    )
    if outcome.failed:
        return None, outcome.reason, outcome.iterations
    return outcome.model, "", outcome.iterations


def _train_fcm(
    group: list[LabeledSeries],
    hp: FcmHyperparams,
    seed: int,
    config: ModelConfig,
    shared_centroids: CentroidSet | None,
) -> tuple[Model | None, str, int]:
    fuzzy = config.fuzzy
    try:
        if shared_centroids is not None:
            centroids = shared_centroids
        else:
            points = np.vstack([embed_deltas(s) for s in group])
            centroids = fcm_cluster(
                points,
                hp.n_concepts,
                m=fuzzy.m,
                tol=fuzzy.tol,
                max_iter=fuzzy.max_iter,
                seed=seed,
                n_init=fuzzy.n_init,
            )
        seqs = [fuzzify_series(s, centroids) for s in group]
        model = train_fcm(
            seqs,
            hp.n_concepts,
            tau=config.fcm.tau,
            de_params=config.fcm.de,
            seed=seed,
            centroids=centroids,
        )
    except TsmbError as exc:
        return None, str(exc), 0
    return model, "", model.n_iter


def _train_entry(
    family: Family,
    owner: Owner,
    group: list[LabeledSeries],
    hyperparams: Hyperparams,
    seed: int,
    config: ModelConfig,
    shared_centroids: CentroidSet | None,
) -> BankEntry:
    start = time.perf_counter()
    if family is Family.HMM:
        assert isinstance(hyperparams, HmmHyperparams)
        model, reason, iterations = _train_hmm(group, hyperparams, seed, config)
    else:
        assert isinstance(hyperparams, FcmHyperparams)
        model, reason, iterations = _train_fcm(group, hyperparams, seed, config, shared_centroids)
    seconds = time.perf_counter() - start
    if model is None:
        logger.warning(
            "%s %s model for %r (#%d) failed: %s",
            family.value.upper(),
            hyperparams.label,
            owner.label,
            owner.index,
            reason,
        )
    return BankEntry(owner, model, reason=reason, iterations=iterations, seconds=seconds)


def train_classifier(
    scheme: SchemeId | str,
    train: Sequence[LabeledSeries],
    hyperparams: Hyperparams,
    seed: int,
    config: ModelConfig | None = None,
    shared_centroids: CentroidSet | None = None,
    n_jobs: int = 1,
) -> TrainedClassifier:
    """Train one model per class (1C) or per training series (NN).

    Model ``i`` is seeded with ``derive_seed(seed, i)`` where ``i`` is the
    owner index. Failed trainings are recorded on the returned classifier.
    With ``config.fuzzy.shared_centroids`` every FCM in the bank fuzzifies
    with one centroid set fitted on all of ``train``.
    """
    scheme = SchemeId.parse(scheme)
    check_hyperparams(scheme, hyperparams)
    if not train:
        raise TsmbError("cannot train a classifier without training series")
    config = config or ModelConfig()
    classes = tuple(sorted({s.label for s in train}))
    groups = _owner_groups(scheme.granularity, train, classes)

    if (
        isinstance(hyperparams, FcmHyperparams)
        and shared_centroids is None
        and config.fuzzy.shared_centroids
    ):
        try:
            shared_centroids = fit_shared_centroids(
                train,
                hyperparams.n_concepts,
                m=config.fuzzy.m,
                tol=config.fuzzy.tol,
                max_iter=config.fuzzy.max_iter,
                seed=seed,
                n_init=config.fuzzy.n_init,
            )
        except TsmbError as exc:
            logger.warning("Shared centroids for P=%d failed: %s", hyperparams.n_concepts, exc)
            reason = f"shared centroids: {exc}"
            return TrainedClassifier(
                scheme=scheme,
                hyperparams=hyperparams,
                classes=classes,
                entries=[BankEntry(owner, None, reason=reason) for owner, _ in groups],
                delta_observations=config.hmm.delta_observations,
            )

    entries = Parallel(n_jobs=n_jobs)(
        delayed(_train_entry)(
            scheme.family,
            owner,
            group,
            hyperparams,
            derive_seed(seed, owner.index),
            config,
            shared_centroids,
        )
        for owner, group in groups
    )
    classifier = TrainedClassifier(
        scheme=scheme,
        hyperparams=hyperparams,
        classes=classes,
        entries=list(entries),
        delta_observations=config.hmm.delta_observations,
    )
    logger.debug(
        "Trained %s [%s]: %d models, %d failed",
        scheme,
        hyperparams.label,
        len(classifier.entries),
        len(classifier.failures),
    )
    return classifier


def save_classifier(classifier: TrainedClassifier, path: Path | str) -> Path:
    return atomic_write_text(path, json.dumps(classifier.to_dict(), indent=2) + "\n")


def load_classifier(path: Path | str) -> TrainedClassifier:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleError(f"{path}: not a JSON bundle ({exc})") from exc
    if not isinstance(data, dict):
        raise BundleError(f"{path}: bundle must be a JSON object")
    return TrainedClassifier.from_dict(data)
