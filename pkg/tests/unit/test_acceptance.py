"""End-to-end benchmark runs on synthetic and archive data."""

import os
from pathlib import Path

import pytest

from tsmb.config import FcmConfig, FuzzyConfig, GridConfig, HmmConfig, ModelConfig, RunConfig
from tsmb.core.classifier import train_classifier
from tsmb.core.entities import FcmHyperparams, HmmHyperparams
from tsmb.core.evaluator import evaluate_test, run_benchmark
from tsmb.data.dataset import load_ucr
from tsmb.data.synthetic import make_sine_vs_ar1
from tsmb.models.de import DeParams
from tsmb.models.hmm import CovarianceType

pytestmark = pytest.mark.slow


@pytest.fixture
def desk_config():
    return RunConfig(
        grid=GridConfig(hmm_states=[2, 3], cov_types=["diagonal"], fcm_concepts=[3]),
        models=ModelConfig(
            hmm=HmmConfig(n_restarts=3),
            fcm=FcmConfig(de=DeParams(max_iter=50)),
        ),
        seed=0,
    )


def _with_shared_centroids(config):
    models = config.models.model_copy(update={"fuzzy": FuzzyConfig(shared_centroids=True)})
    return config.model_copy(update={"models": models})


def test_synthetic_classes_are_separated(desk_config):
    dataset = make_sine_vs_ar1(seed=0)
    reports = run_benchmark(dataset, desk_config, seed=0, schemes=["hmm-1c", "hmm-nn", "fcm-nn"])
    # class maps only compare on one shared set of concepts
    reports += run_benchmark(dataset, _with_shared_centroids(desk_config), 0, ["fcm-1c"])
    assert [r.scheme for r in reports] == ["hmm-1c", "hmm-nn", "fcm-nn", "fcm-1c"]
    for report in reports:
        assert report.test_accuracy >= 0.90, report.scheme


def test_per_series_banks_keep_up_on_multimodal_classes(desk_config):
    dataset = make_sine_vs_ar1(seed=1, multimodal=True)
    accuracy = {r.scheme: r.test_accuracy for r in run_benchmark(dataset, desk_config, seed=1)}
    assert accuracy["hmm-nn"] >= accuracy["hmm-1c"] - 0.05
    assert accuracy["fcm-nn"] >= accuracy["fcm-1c"] - 0.05


@pytest.mark.skipif("TSMB_PLANE_DIR" not in os.environ, reason="TSMB_PLANE_DIR not set")
def test_plane_dataset():
    dataset = load_ucr(Path(os.environ["TSMB_PLANE_DIR"]), "Plane")
    models = ModelConfig()
    shared = models.model_copy(update={"fuzzy": FuzzyConfig(shared_centroids=True)})
    runs = [
        ("hmm-nn", HmmHyperparams(n_states=3, cov_type=CovarianceType.FULL), models),
        ("fcm-nn", FcmHyperparams(n_concepts=7), models),
        ("fcm-1c", FcmHyperparams(n_concepts=7), shared),
    ]
    for scheme, hyperparams, config in runs:
        classifier = train_classifier(scheme, dataset.train, hyperparams, 0, config, n_jobs=-1)
        assert evaluate_test(classifier, dataset.test) >= 0.90, scheme
