"""Fuzzy cognitive maps: reasoning, one-step prediction error and DE training.

Concept ``i`` at time ``t+1`` is ``f(sum_j w_ji * x_j(t))`` with the sigmoid
``f(x) = 1 / (1 + exp(-tau * x))``. Weights live in ``[-1, 1]`` and self-loops
are allowed. In matrix form a row vector of activations maps to
``f(x @ W)``, so ``W[j, i]`` is the edge from concept ``j`` to concept ``i``.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import expit

from tsmb.exceptions import FcmError
from tsmb.models.de import DeParams, de_optimize
from tsmb.models.fuzzy import CentroidSet

logger = logging.getLogger(__name__)

DEFAULT_TAU = 5.0


def sigmoid(x: float | np.ndarray, tau: float = DEFAULT_TAU) -> float | np.ndarray:
    """Logistic squashing ``1 / (1 + exp(-tau * x))`` into (0, 1)."""
    if not tau > 0:
        raise FcmError(f"sigmoid steepness must be positive, got {tau}")
    out = expit(tau * np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FcmModel:
    """Weight matrix, sigmoid steepness and the centroids used to fuzzify input."""

    weights: np.ndarray
    tau: float = DEFAULT_TAU
    centroids: CentroidSet | None = None
    train_error: float | None = None
    n_iter: int = 0

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise FcmError(f"weights must be a square matrix, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)) or np.any(np.abs(weights) > 1.0):
            raise FcmError("weights must be finite and lie in [-1, 1]")
        if not self.tau > 0:
            raise FcmError(f"tau must be positive, got {self.tau}")
        if self.centroids is not None and self.centroids.n_concepts != weights.shape[0]:
            raise FcmError(
                f"{weights.shape[0]} concepts in weights but "
                f"{self.centroids.n_concepts} centroids"
            )
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def n_concepts(self) -> int:
        return int(self.weights.shape[0])

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "P": self.n_concepts,
            "tau": self.tau,
            "weights": self.weights.reshape(-1).tolist(),
            "train_error": self.train_error,
            "n_iter": self.n_iter,
        }
        if self.centroids is not None:
            data["centroids"] = self.centroids.centroids.tolist()
            data["M"] = self.centroids.m
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FcmModel:
        p = int(data["P"])
        centroids = None
        if data.get("centroids") is not None:
            centroids = CentroidSet(np.asarray(data["centroids"], dtype=float), m=float(data["M"]))
        return cls(
            weights=np.asarray(data["weights"], dtype=float).reshape(p, p),
            tau=float(data["tau"]),
            centroids=centroids,
            train_error=data.get("train_error"),
            n_iter=int(data.get("n_iter", 0)),
        )


def fcm_step(activation: Sequence[float] | np.ndarray, model: FcmModel) -> np.ndarray:
    """One reasoning step: ``out_i = f(sum_j w_ji * a_j)``."""
    a = np.asarray(activation, dtype=float)
    if a.shape[-1] != model.n_concepts:
        raise FcmError(f"activation has {a.shape[-1]} entries, map has {model.n_concepts} concepts")
    if not np.all(np.isfinite(a)):
        raise FcmError("activation must be finite")
    return expit(model.tau * (a @ model.weights))


def simulate_fcm(model: FcmModel, start: Sequence[float], steps: int) -> np.ndarray:
    """Iterate the map from ``start``; returns ``steps + 1`` rows including the start."""
    rows = [np.asarray(start, dtype=float)]
    for _ in range(steps):
        rows.append(fcm_step(rows[-1], model))
    return np.vstack(rows)


def _consecutive_pairs(
    seqs: Sequence[np.ndarray], n_concepts: int
) -> tuple[np.ndarray, np.ndarray]:
    """Stack (row_t, row_{t+1}) pairs of every sequence; no pair crosses sequences."""
    sources, targets = [], []
    for index, seq in enumerate(seqs):
        rows = np.asarray(seq, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 2:
            raise FcmError(f"activation sequence {index} needs at least 2 rows")
        if rows.shape[1] != n_concepts:
            raise FcmError(
                f"activation sequence {index} has {rows.shape[1]} columns, expected {n_concepts}"
            )
        sources.append(rows[:-1])
        targets.append(rows[1:])
    if not sources:
        raise FcmError("no activation sequences given")
    return np.vstack(sources), np.vstack(targets)


def fcm_prediction_error(model: FcmModel, seqs: Sequence[np.ndarray]) -> float:
    """Mean squared one-step-ahead error over all consecutive row pairs."""
    sources, targets = _consecutive_pairs(seqs, model.n_concepts)
    predicted = expit(model.tau * (sources @ model.weights))
    return float(np.mean((predicted - targets) ** 2))


# Upper bound on population x pairs x concepts values materialised per slice.
POPULATION_CHUNK_ELEMENTS = 1 << 22


class _PopulationMse:
    """MSE of every candidate weight matrix in a DE population.

    Candidates are evaluated in slices so memory stays bounded by
    ``max_elements`` floats whatever the population and series length.
    """

    def __init__(
        self,
        sources: np.ndarray,
        targets: np.ndarray,
        tau: float,
        max_elements: int = POPULATION_CHUNK_ELEMENTS,
    ):
        self.sources = sources
        self.targets = targets
        self.tau = tau
        self.n_concepts = sources.shape[1]
        self.chunk_size = max(1, max_elements // targets.size)

    def __call__(self, population: np.ndarray) -> np.ndarray:
        weights = population.reshape(-1, self.n_concepts, self.n_concepts)
        out = np.empty(weights.shape[0])
        for start in range(0, weights.shape[0], self.chunk_size):
            block = weights[start : start + self.chunk_size]
            predicted = expit(self.tau * np.einsum("tj,kji->kti", self.sources, block))
            predicted -= self.targets[None, :, :]
            out[start : start + block.shape[0]] = np.mean(predicted**2, axis=(1, 2))
        return out


def train_fcm(
    seqs: Sequence[np.ndarray],
    n_concepts: int,
    tau: float = DEFAULT_TAU,
    de_params: DeParams | None = None,
    seed: int = 0,
    centroids: CentroidSet | None = None,
) -> FcmModel:
    """Learn the weight matrix minimising one-step MSE with Differential Evolution.

    The zero matrix is injected into the initial population, so the result is
    never worse than the constant 0.5 predictor.
    """
    if not seqs:
        raise FcmError("train_fcm needs at least one activation sequence")
    sources, targets = _consecutive_pairs(seqs, n_concepts)
    objective = _PopulationMse(sources, targets, tau)

    dim = n_concepts * n_concepts
    result = de_optimize(
        objective,
        bounds=[(-1.0, 1.0)] * dim,
        params=de_params,
        seed=seed,
        seeds_in_population=[np.zeros(dim)],
        vectorized=True,
    )
    logger.debug(
        "FCM trained: P=%d, %d pairs, MSE=%.6g after %d generations",
        n_concepts,
        sources.shape[0],
        result.fun,
        result.nit,
    )
    return FcmModel(
        weights=result.x.reshape(n_concepts, n_concepts),
        tau=tau,
        centroids=centroids,
        train_error=result.fun,
        n_iter=result.nit,
    )
