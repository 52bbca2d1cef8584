"""Tests for model-bank classifiers."""

import math

import numpy as np
import pytest

from tsmb.config import FcmConfig, FuzzyConfig, HmmConfig, ModelConfig
from tsmb.core.classifier import (
    BankEntry,
    TrainedClassifier,
    load_classifier,
    observations,
    predict,
    save_classifier,
    score,
    train_classifier,
)
from tsmb.core.entities import FcmHyperparams, HmmHyperparams, Owner, SchemeId
from tsmb.data.dataset import LabeledSeries
from tsmb.exceptions import BundleError, PredictionError, TsmbError
from tsmb.models.de import DeParams
from tsmb.models.fcm import FcmModel
from tsmb.models.fuzzy import CentroidSet
from tsmb.models.hmm import CovarianceType, GaussianHmm


def _level_series(label, level, n, seed, length=30):
    rng = np.random.default_rng(seed)
    return [
        LabeledSeries(values=level + rng.normal(size=length), label=label) for _ in range(n)
    ]


@pytest.fixture
def fast_models():
    return ModelConfig(
        hmm=HmmConfig(max_iter=20, n_restarts=2),
        fuzzy=FuzzyConfig(max_iter=100),
        fcm=FcmConfig(de=DeParams(max_iter=10, popsize_factor=5)),
    )


@pytest.fixture
def two_levels():
    return _level_series("A", 0.0, 6, seed=1) + _level_series("B", 5.0, 6, seed=2)


def _hmm(mean):
    return GaussianHmm([1.0], [[1.0]], [[mean]], [[1.0]])


def _manual_classifier(models, scheme="hmm-1c"):
    entries = [BankEntry(Owner(label, i), model) for i, (label, model) in enumerate(models)]
    hp = HmmHyperparams(n_states=1) if scheme.startswith("hmm") else FcmHyperparams(n_concepts=2)
    return TrainedClassifier(
        scheme=SchemeId.parse(scheme),
        hyperparams=hp,
        classes=tuple(sorted({label for label, _ in models})),
        entries=entries,
    )


class TestObservations:
    def test_raw_values(self):
        s = LabeledSeries(values=[1.0, 2.0, 4.0], label="A")
        np.testing.assert_array_equal(observations(s), [[1.0], [2.0], [4.0]])

    def test_delta_rows(self):
        s = LabeledSeries(values=[1.0, 2.0, 4.0], label="A")
        np.testing.assert_array_equal(observations(s, delta=True), [[2.0, 1.0], [4.0, 2.0]])


class TestTrainClassifier:
    def test_per_class_bank_size(self, two_levels, fast_models):
        clf = train_classifier("hmm-1c", two_levels, HmmHyperparams(n_states=1), 0, fast_models)
        assert len(clf.entries) == 2
        assert [e.owner for e in clf.entries] == [Owner("A", 0), Owner("B", 1)]

    def test_per_series_bank_size(self, two_levels, fast_models):
        clf = train_classifier("hmm-nn", two_levels, HmmHyperparams(n_states=1), 0, fast_models)
        assert len(clf.entries) == len(two_levels)
        assert [e.owner.label for e in clf.entries] == [s.label for s in two_levels]

    def test_classes_are_sorted(self, fast_models):
        train = _level_series("zeta", 0.0, 2, 0) + _level_series("alpha", 3.0, 2, 1)
        clf = train_classifier("hmm-1c", train, HmmHyperparams(n_states=1), 0, fast_models)
        assert clf.classes == ("alpha", "zeta")

    def test_separated_levels_are_classified(self, two_levels, fast_models):
        clf = train_classifier("hmm-1c", two_levels, HmmHyperparams(n_states=1), 0, fast_models)
        for series in _level_series("A", 0.0, 3, 9) + _level_series("B", 5.0, 3, 10):
            assert predict(clf, series) == series.label

    def test_deterministic(self, two_levels, fast_models):
        hp = HmmHyperparams(n_states=2)
        a = train_classifier("hmm-nn", two_levels, hp, 7, fast_models)
        b = train_classifier("hmm-nn", two_levels, hp, 7, fast_models)
        for x, y in zip(a.entries, b.entries):
            np.testing.assert_array_equal(x.model.means, y.model.means)

    def test_constant_series_fail_full_covariance(self, fast_models):
        train = [LabeledSeries(values=[2.0] * 10, label="A")] + _level_series("B", 0.0, 2, 3)
        hp = HmmHyperparams(n_states=1, cov_type=CovarianceType.FULL)
        clf = train_classifier("hmm-nn", train, hp, 0, fast_models)
        assert [owner.index for owner, _ in clf.failures] == [0]
        assert "collapse" in clf.failures[0][1]
        assert not clf.is_usable()
        assert clf.is_usable(lenient=True)

    def test_class_without_model_is_never_usable(self, fast_models):
        train = [LabeledSeries(values=[2.0] * 10, label="A")] + _level_series("B", 0.0, 2, 3)
        hp = HmmHyperparams(n_states=1, cov_type=CovarianceType.FULL)
        clf = train_classifier("hmm-1c", train, hp, 0, fast_models)
        assert [owner.label for owner, _ in clf.failures] == ["A"]
        assert not clf.is_usable()
        assert not clf.is_usable(lenient=True)

    def test_fcm_failure_is_recorded(self, fast_models):
        train = [LabeledSeries(values=[1.0, 1.0, 1.0], label="A")] + _level_series("B", 0, 1, 2)
        clf = train_classifier("fcm-nn", train, FcmHyperparams(n_concepts=3), 0, fast_models)
        assert clf.entries[0].failed
        assert not clf.entries[1].failed

    def test_fcm_bank_carries_centroids(self, two_levels, fast_models):
        clf = train_classifier("fcm-1c", two_levels, FcmHyperparams(n_concepts=3), 0, fast_models)
        for entry in clf.entries:
            assert entry.model.centroids.n_concepts == 3
            assert entry.model.weights.shape == (3, 3)

    def test_shared_centroids(self, two_levels, fast_models):
        config = fast_models.model_copy(
            update={"fuzzy": FuzzyConfig(max_iter=100, shared_centroids=True)}
        )
        clf = train_classifier("fcm-nn", two_levels, FcmHyperparams(n_concepts=3), 0, config)
        first = clf.entries[0].model.centroids.centroids
        for entry in clf.entries[1:]:
            np.testing.assert_array_equal(entry.model.centroids.centroids, first)

    def test_shared_centroid_failure_fails_every_model(self, fast_models):
        config = fast_models.model_copy(update={"fuzzy": FuzzyConfig(shared_centroids=True)})
        train = [LabeledSeries(values=[1.0, 1.0, 1.0], label=label) for label in "AB"]
        clf = train_classifier("fcm-1c", train, FcmHyperparams(n_concepts=3), 0, config)
        assert len(clf.failures) == 2
        assert all(reason.startswith("shared centroids") for _, reason in clf.failures)

    def test_wrong_family_hyperparams(self, two_levels):
        with pytest.raises(TsmbError):
            train_classifier("fcm-1c", two_levels, HmmHyperparams(n_states=2), 0)

    def test_empty_training_set(self):
        with pytest.raises(TsmbError):
            train_classifier("hmm-1c", [], HmmHyperparams(n_states=2), 0)


class TestScoreAndPredict:
    def test_hmm_picks_highest_likelihood(self):
        clf = _manual_classifier([("A", _hmm(0.0)), ("B", _hmm(5.0))])
        assert predict(clf, LabeledSeries(values=[4.8, 5.1, 5.3], label="?")) == "B"

    def test_fcm_picks_lowest_error(self):
        cs = CentroidSet(np.array([[0.0, 0.0], [1.0, 0.0]]))
        series = LabeledSeries(values=[0.2, 0.4, 0.1, 0.7, 0.3], label="?")
        good = FcmModel(weights=np.zeros((2, 2)), centroids=cs)
        bad = FcmModel(weights=np.ones((2, 2)), centroids=cs)
        clf = _manual_classifier([("A", bad), ("B", good)], scheme="fcm-1c")
        scores = {e.owner.label: clf.score(e, series) for e in clf.entries}
        assert predict(clf, series) == min(scores, key=scores.get)

    def test_ties_go_to_smallest_label(self):
        clf = _manual_classifier([("B", _hmm(1.0)), ("A", _hmm(1.0))])
        assert predict(clf, LabeledSeries(values=[1.0, 1.0], label="?")) == "A"

    def test_failing_score_is_sentinel(self):
        two_dim = GaussianHmm([1.0], [[1.0]], [[0.0, 0.0]], [[1.0, 1.0]])
        assert score(two_dim, LabeledSeries(values=[1.0, 2.0], label="A")) == -math.inf
        bare = FcmModel(weights=np.zeros((2, 2)))
        assert score(bare, LabeledSeries(values=[1.0, 2.0], label="A")) == math.inf

    def test_failed_entries_are_skipped(self):
        clf = _manual_classifier([("A", None), ("B", _hmm(100.0))])
        assert predict(clf, LabeledSeries(values=[0.0, 0.0], label="?")) == "B"

    def test_empty_bank(self):
        clf = _manual_classifier([("A", None)])
        with pytest.raises(PredictionError):
            predict(clf, LabeledSeries(values=[0.0, 0.0], label="?"))


class TestBundle:
    def test_save_and_load(self, tmp_path, two_levels, fast_models):
        clf = train_classifier("fcm-1c", two_levels, FcmHyperparams(n_concepts=3), 0, fast_models)
        path = save_classifier(clf, tmp_path / "bundle.json")
        loaded = load_classifier(path)
        assert loaded.scheme == clf.scheme
        assert loaded.hyperparams == clf.hyperparams
        for series in two_levels:
            assert predict(loaded, series) == predict(clf, series)

    def test_failed_entry_survives(self, tmp_path):
        clf = _manual_classifier([("A", None), ("B", _hmm(0.0))])
        clf.entries[0].reason = "boom"
        loaded = load_classifier(save_classifier(clf, tmp_path / "b.json"))
        assert loaded.failures == [(Owner("A", 0), "boom")]

    def test_not_json(self, tmp_path):
        path = tmp_path / "b.json"
        path.write_text("not json")
        with pytest.raises(BundleError):
            load_classifier(path)

    def test_missing_keys(self, tmp_path):
        path = tmp_path / "b.json"
        path.write_text('{"scheme": "hmm-1c"}')
        with pytest.raises(BundleError):
            load_classifier(path)
