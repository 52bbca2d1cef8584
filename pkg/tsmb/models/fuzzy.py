"""Delta embedding, fuzzy c-means clustering and membership-based fuzzification.

A univariate series ``z`` is embedded as points ``(z_i, z_i - z_{i-1})``.
Fuzzy c-means prototypes in that plane become the concepts of a fuzzy
cognitive map, and every embedded point is mapped to its vector of
memberships to those prototypes.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import softmax

from tsmb.exceptions import FuzzyError

logger = logging.getLogger(__name__)

# Distance below which a point is treated as sitting on a centroid.
SINGULAR_DISTANCE = 1e-12

DEFAULT_M = 2.0
DEFAULT_TOL = 1e-5
DEFAULT_MAX_ITER = 300


def _values_of(series: Any) -> np.ndarray:
    values = getattr(series, "values", series)
    return np.asarray(values, dtype=float).reshape(-1)


def embed_deltas(series: Any) -> np.ndarray:
    """Return the ``(N-1, 2)`` array of ``(z_i, z_i - z_{i-1})`` points, in order."""
    values = _values_of(series)
    if values.size < 2:
        raise FuzzyError(f"delta embedding needs at least 2 values, got {values.size}")
    return np.column_stack([values[1:], np.diff(values)])


@dataclass(frozen=True)
class CentroidSet:
    """Fuzzy c-means prototypes in the (value, delta) plane plus the fuzzifier M."""

    centroids: np.ndarray
    m: float = DEFAULT_M

    def __post_init__(self):
        centroids = np.array(self.centroids, dtype=float)
        if centroids.ndim != 2 or centroids.shape[1] != 2:
            raise FuzzyError(f"centroids must have shape (P, 2), got {centroids.shape}")
        if centroids.shape[0] < 2:
            raise FuzzyError("a centroid set needs at least 2 concepts")
        if not self.m > 1.0:
            raise FuzzyError(f"fuzzification coefficient must exceed 1, got {self.m}")
        if not np.all(np.isfinite(centroids)):
            raise FuzzyError("centroids must be finite")
        gaps = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=-1)
        gaps[np.diag_indices_from(gaps)] = np.inf
        if np.min(gaps) < SINGULAR_DISTANCE:
            raise FuzzyError("centroid set contains identical centroids")
        centroids.setflags(write=False)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "m", float(self.m))

    @property
    def n_concepts(self) -> int:
        return int(self.centroids.shape[0])

    def to_dict(self) -> dict[str, Any]:
        return {"centroids": self.centroids.tolist(), "m": self.m}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CentroidSet:
        return cls(centroids=np.asarray(data["centroids"], dtype=float), m=float(data["m"]))


# ----------------------------------------------------------------------
# Memberships
# ----------------------------------------------------------------------


def memberships(points: np.ndarray, centroids: np.ndarray, m: float) -> np.ndarray:
    """Membership matrix ``(n_points, P)`` of every point to every centroid.

    ``u_ij = 1 / sum_k (d_ij / d_ik) ** (2 / (m - 1))``, evaluated as a softmax
    of ``-(2 / (m - 1)) * log d`` so that M close to 1 cannot overflow. A point
    within SINGULAR_DISTANCE of one or more centroids gets an indicator
    vector, split equally among all coinciding centroids.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cents = np.asarray(centroids, dtype=float)
    distances = np.linalg.norm(pts[:, None, :] - cents[None, :, :], axis=-1)

    singular = distances < SINGULAR_DISTANCE
    on_centroid = singular.any(axis=1)

    exponent = 2.0 / (m - 1.0)
    with np.errstate(divide="ignore"):
        log_distances = np.log(np.where(singular, 1.0, distances))
    u = softmax(-exponent * log_distances, axis=1)

    if on_centroid.any():
        hits = singular[on_centroid].astype(float)
        u[on_centroid] = hits / hits.sum(axis=1, keepdims=True)
    return u


def membership(point: Sequence[float], cs: CentroidSet) -> np.ndarray:
    """Membership vector (length P) of a single (value, delta) point."""
    return memberships(np.asarray(point, dtype=float).reshape(1, 2), cs.centroids, cs.m)[0]


def fuzzify_series(series: Any, cs: CentroidSet) -> np.ndarray:
    """Activation sequence of a series: one membership row per embedded point."""
    return memberships(embed_deltas(series), cs.centroids, cs.m)


# ----------------------------------------------------------------------
# Clustering
# ----------------------------------------------------------------------


@dataclass
class FuzzyCMeans:
    """Alternating fuzzy c-means on (value, delta) points.

    Initial prototypes are ``n_clusters`` distinct data points sampled with
    the seed. Each iteration recomputes memberships, then prototypes
    ``v_j = sum_i u_ij^M p_i / sum_i u_ij^M``; it stops once no prototype moves
    more than ``tol`` or after ``max_iter`` iterations.
    """

    n_clusters: int
    m: float = DEFAULT_M
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = 0

    centroids_: np.ndarray | None = field(default=None, init=False)
    objective_history_: list[float] = field(default_factory=list, init=False)
    n_iter_: int = field(default=0, init=False)

    @staticmethod
    def objective(points: np.ndarray, u: np.ndarray, centroids: np.ndarray, m: float) -> float:
        """J_M = sum_i sum_j u_ij^M ||p_i - v_j||^2."""
        sq = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=-1)
        return float(np.sum((u**m) * sq))

    def fit(self, points: np.ndarray) -> FuzzyCMeans:
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise FuzzyError(f"points must have shape (n, 2), got {pts.shape}")
        if self.n_clusters < 2:
            raise FuzzyError("fuzzy c-means needs at least 2 clusters")
        if not self.m > 1.0:
            raise FuzzyError(f"fuzzification coefficient must exceed 1, got {self.m}")
        if not self.tol > 0:
            raise FuzzyError("tolerance must be positive")

        distinct = np.unique(pts, axis=0)
        if len(distinct) < self.n_clusters:
            raise FuzzyError(
                f"{len(distinct)} distinct points cannot support {self.n_clusters} clusters"
            )

        rng = np.random.default_rng(self.seed)
        centroids = distinct[rng.choice(len(distinct), size=self.n_clusters, replace=False)]

        self.objective_history_ = []
        for iteration in range(1, self.max_iter + 1):
            u = memberships(pts, centroids, self.m)
            weights = u**self.m
            updated = (weights.T @ pts) / weights.sum(axis=0)[:, None]
            if not np.all(np.isfinite(updated)):
                raise FuzzyError(f"fuzzy c-means produced NaN at iteration {iteration}")

            self.objective_history_.append(self.objective(pts, u, updated, self.m))
            displacement = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
            centroids = updated
            self.n_iter_ = iteration
            if displacement < self.tol:
                break

        self.centroids_ = centroids
        return self

    def centroid_set(self) -> CentroidSet:
        if self.centroids_ is None:
            raise FuzzyError("fuzzy c-means has not been fitted")
        return CentroidSet(centroids=self.centroids_, m=self.m)


def fcm_cluster(
    points: np.ndarray,
    n_clusters: int,
    m: float = DEFAULT_M,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    n_init: int = 1,
) -> CentroidSet:
    """Cluster embedded points into ``n_clusters`` prototypes.

    With ``n_init > 1`` the run with the lowest final J_M wins; run ``r`` uses
    ``seed + r``. Raises FuzzyError when there are fewer distinct points than
    clusters, when an iteration yields NaN or when prototypes coincide.
    """
    best: FuzzyCMeans | None = None
    for restart in range(max(1, n_init)):
        run = FuzzyCMeans(n_clusters, m=m, tol=tol, max_iter=max_iter, seed=seed + restart)
        run.fit(points)
        if best is None or run.objective_history_[-1] < best.objective_history_[-1]:
            best = run
    assert best is not None
    logger.debug(
        "fuzzy c-means: P=%d, %d iterations, J=%.6g",
        n_clusters,
        best.n_iter_,
        best.objective_history_[-1],
    )
    return best.centroid_set()


def fit_shared_centroids(
    series: Sequence[Any],
    n_clusters: int,
    m: float = DEFAULT_M,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    n_init: int = 1,
) -> CentroidSet:
    """One centroid set fitted on the embedded points of all given series."""
    points = np.vstack([embed_deltas(s) for s in series])
    return fcm_cluster(
        points, n_clusters, m=m, tol=tol, max_iter=max_iter, seed=seed, n_init=n_init
    )
