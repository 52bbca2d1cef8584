"""Gaussian-emission hidden Markov models.

Likelihoods for scoring are computed in log space by a forward recursion
with log-sum-exp. Baum-Welch training steps ``hmmlearn``'s ``GaussianHMM``
one EM iteration at a time, so the per-iteration history, the covariance
floor and the collapse rule stay under this module's control.

Training problems are reported through ``FitOutcome`` instead of raising, so
a classifier bank can record which owner failed and carry on.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from hmmlearn.hmm import GaussianHMM
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.special import logsumexp

from tsmb.exceptions import HmmError

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))

# Added to every estimated variance / covariance diagonal.
COVARIANCE_FLOOR = 1e-6

INIT_JITTER = 0.1

DEFAULT_MAX_ITER = 50
DEFAULT_TOL = 1e-3
DEFAULT_RESTARTS = 10


class CovarianceType(str, Enum):
    """Constraint on the per-state emission covariance."""

    SPHERICAL = "spherical"
    DIAGONAL = "diagonal"
    FULL = "full"

    @property
    def rank(self) -> int:
        """Position in the spherical < diagonal < full ordering."""
        return list(CovarianceType).index(self)

    @property
    def short(self) -> str:
        return {"spherical": "sphe", "diagonal": "diag", "full": "full"}[self.value]


def _infer_cov_type(cov: np.ndarray) -> CovarianceType:
    return {0: CovarianceType.SPHERICAL, 1: CovarianceType.DIAGONAL, 2: CovarianceType.FULL}[
        cov.ndim
    ]


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return cholesky(cov, lower=True)
    except (LinAlgError, ValueError) as exc:
        raise HmmError(f"covariance is not positive-definite: {exc}") from exc


def log_gaussian_pdf(
    x: Sequence[float] | np.ndarray,
    mean: Sequence[float] | np.ndarray,
    cov: float | Sequence[float] | np.ndarray,
    cov_type: CovarianceType | str | None = None,
) -> float:
    """Log density of a multivariate normal at ``x``.

    ``cov`` is a scalar variance (spherical), a vector of variances
    (diagonal) or a matrix (full); ``cov_type`` is inferred from its shape
    when omitted. Full covariances go through a Cholesky factorisation.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.asarray(cov, dtype=float)
    kind = CovarianceType(cov_type) if cov_type is not None else _infer_cov_type(cov)
    if x.shape != mean.shape:
        raise HmmError(f"observation shape {x.shape} does not match mean shape {mean.shape}")
    d = x.shape[0]
    diff = x - mean

    if kind is CovarianceType.SPHERICAL:
        var = float(cov)
        if not var > 0:
            raise HmmError("spherical variance must be positive")
        return float(-0.5 * (d * LOG_2PI + d * np.log(var) + diff @ diff / var))
    if kind is CovarianceType.DIAGONAL:
        var = np.broadcast_to(cov, (d,))
        if np.any(var <= 0):
            raise HmmError("diagonal variances must be positive")
        return float(-0.5 * (d * LOG_2PI + np.sum(np.log(var)) + np.sum(diff**2 / var)))

    lower = _cholesky(cov.reshape(d, d))
    solved = solve_triangular(lower, diff, lower=True)
    log_det = 2.0 * np.sum(np.log(np.diag(lower)))
    return float(-0.5 * (d * LOG_2PI + log_det + solved @ solved))


@dataclass(frozen=True)
class GaussianHmm:
    """Start distribution, row-stochastic transitions and per-state Gaussians.

    ``covariances`` is shaped by ``cov_type``: ``(n,)`` spherical variances,
    ``(n, d)`` diagonal variances or ``(n, d, d)`` full matrices.
    """

    start_probs: np.ndarray
    transitions: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    cov_type: CovarianceType = CovarianceType.DIAGONAL

    def __post_init__(self):
        pi = np.array(self.start_probs, dtype=float)
        trans = np.array(self.transitions, dtype=float)
        means = np.array(self.means, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        kind = CovarianceType(self.cov_type)
        n, d = means.shape
        covs = np.array(self.covariances, dtype=float)
        if kind is CovarianceType.DIAGONAL and covs.ndim == 1 and d == 1:
            covs = covs[:, None]

        if n < 1:
            raise HmmError("an HMM needs at least one state")
        if pi.shape != (n,) or trans.shape != (n, n):
            raise HmmError(
                f"start/transition shapes {pi.shape}/{trans.shape} do not fit {n} states"
            )
        checks = (("start", pi), ("transition", trans), ("mean", means), ("covariance", covs))
        for name, arr in checks:
            if not np.all(np.isfinite(arr)):
                raise HmmError(f"{name} parameters must be finite")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
            raise HmmError("start probabilities must form a distribution")
        if np.any(trans < 0) or np.any(np.abs(trans.sum(axis=1) - 1.0) > 1e-9):
            raise HmmError("transition rows must sum to 1")

        expected = {
            CovarianceType.SPHERICAL: (n,),
            CovarianceType.DIAGONAL: (n, d),
            CovarianceType.FULL: (n, d, d),
        }[kind]
        if covs.shape != expected:
            raise HmmError(f"{kind.value} covariances need shape {expected}, got {covs.shape}")
        if kind is CovarianceType.FULL:
            for state, cov in enumerate(covs):
                if not np.allclose(cov, cov.T, atol=1e-12):
                    raise HmmError(f"covariance of state {state} is not symmetric")
                _cholesky(cov)
            variances = np.diagonal(covs, axis1=1, axis2=2)
        else:
            variances = covs
        if np.any(variances < COVARIANCE_FLOOR):
            raise HmmError(f"variances must be at least {COVARIANCE_FLOOR}")

        for arr in (pi, trans, means, covs):
            arr.setflags(write=False)
        object.__setattr__(self, "start_probs", pi)
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        object.__setattr__(self, "cov_type", kind)

    @property
    def n_states(self) -> int:
        return int(self.means.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    def full_covariances(self) -> np.ndarray:
        n, d = self.means.shape
        if self.cov_type is CovarianceType.SPHERICAL:
            return self.covariances[:, None, None] * np.eye(d)[None, :, :]
        if self.cov_type is CovarianceType.DIAGONAL:
            return np.stack([np.diag(v) for v in self.covariances])
        return np.array(self.covariances)

    def with_cov_type(self, cov_type: CovarianceType | str) -> GaussianHmm:
        """Same model under another constraint. Widening (spherical to diagonal to
        full) keeps every density unchanged; narrowing keeps the variances' mean
        or diagonal."""
        kind = CovarianceType(cov_type)
        if kind is self.cov_type:
            return self
        full = self.full_covariances()
        variances = np.diagonal(full, axis1=1, axis2=2)
        covs = {
            CovarianceType.SPHERICAL: variances.mean(axis=1),
            CovarianceType.DIAGONAL: variances,
            CovarianceType.FULL: full,
        }[kind]
        return GaussianHmm(self.start_probs, self.transitions, self.means, covs, kind)

    def log_emissions(self, obs: np.ndarray) -> np.ndarray:
        """``(T, n_states)`` log densities of every observation under every state."""
        X = as_observations(obs, self.dim)
        d = self.dim
        diff = X[:, None, :] - self.means[None, :, :]
        if self.cov_type is CovarianceType.SPHERICAL:
            var = self.covariances
            return -0.5 * (d * LOG_2PI + d * np.log(var) + np.sum(diff**2, axis=2) / var)
        if self.cov_type is CovarianceType.DIAGONAL:
            var = self.covariances
            return -0.5 * (
                d * LOG_2PI + np.sum(np.log(var), axis=1) + np.sum(diff**2 / var[None], axis=2)
            )
        out = np.empty((X.shape[0], self.n_states))
        for state, cov in enumerate(self.covariances):
            lower = _cholesky(cov)
            solved = solve_triangular(lower, diff[:, state, :].T, lower=True)
            log_det = 2.0 * np.sum(np.log(np.diag(lower)))
            out[:, state] = -0.5 * (d * LOG_2PI + log_det + np.sum(solved**2, axis=0))
        return out

    def sample(self, n_samples: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``(observations (n, d), states (n,))`` from the model."""
        rng = np.random.default_rng(seed)
        covs = self.full_covariances()
        states = np.empty(n_samples, dtype=int)
        obs = np.empty((n_samples, self.dim))
        state = rng.choice(self.n_states, p=self.start_probs)
        for t in range(n_samples):
            if t > 0:
                state = rng.choice(self.n_states, p=self.transitions[state])
            states[t] = state
            obs[t] = rng.multivariate_normal(self.means[state], covs[state])
        return obs, states

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_states": self.n_states,
            "dim": self.dim,
            "cov_type": self.cov_type.value,
            "pi": self.start_probs.tolist(),
            "A": self.transitions.reshape(-1).tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GaussianHmm:
        n = int(data["n_states"])
        return cls(
            start_probs=np.asarray(data["pi"], dtype=float),
            transitions=np.asarray(data["A"], dtype=float).reshape(n, n),
            means=np.asarray(data["means"], dtype=float).reshape(n, int(data["dim"])),
            covariances=np.asarray(data["covariances"], dtype=float),
            cov_type=CovarianceType(data["cov_type"]),
        )


def as_observations(obs: Any, dim: int | None = None) -> np.ndarray:
    """Coerce a sequence to a ``(T, d)`` float array; 1-D input becomes ``d = 1``."""
    X = np.asarray(obs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise HmmError(f"observations must be 1-D or 2-D, got {X.ndim} dimensions")
    if X.shape[0] == 0:
        raise HmmError("observation sequence is empty")
    if dim is not None and X.shape[1] != dim:
        raise HmmError(f"observations have dimension {X.shape[1]}, model expects {dim}")
    if not np.all(np.isfinite(X)):
        raise HmmError("observations must be finite")
    return X


def forward_log_likelihood(model: GaussianHmm, obs: Any) -> float:
    """``log P(obs | model)`` by the forward recursion with log-sum-exp per step."""
    log_b = model.log_emissions(obs)
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.start_probs)
        log_a = np.log(model.transitions)
    log_alpha = log_pi + log_b[0]
    for t in range(1, log_b.shape[0]):
        log_alpha = logsumexp(log_alpha[:, None] + log_a, axis=0) + log_b[t]
    return float(logsumexp(log_alpha))


# ----------------------------------------------------------------------
# Baum-Welch
# ----------------------------------------------------------------------

_HMMLEARN_COVARIANCE = {
    CovarianceType.SPHERICAL: "spherical",
    CovarianceType.DIAGONAL: "diag",
    CovarianceType.FULL: "full",
}


@dataclass
class FitOutcome:
    """Result of an HMM fit: a model, or a failure with its reason."""

    model: GaussianHmm | None
    failed: bool = False
    reason: str = ""
    final_loglik: float = float("-inf")
    iterations: int = 0
    restarts_used: int = 1
    history: list[float] = field(default_factory=list)

    @classmethod
    def failure(
        cls, reason: str, iterations: int = 0, history: list[float] | None = None
    ) -> FitOutcome:
        return cls(
            model=None,
            failed=True,
            reason=reason,
            iterations=iterations,
            history=list(history or []),
        )


class _CovarianceCollapse(Exception):
    pass


def _floored(raw: np.ndarray, cov_type: CovarianceType) -> np.ndarray:
    """Constrained covariance from a full ``(d, d)`` estimate, plus the floor."""
    if cov_type is CovarianceType.FULL:
        raw = 0.5 * (raw + raw.T)
        if np.min(np.linalg.eigvalsh(raw)) <= COVARIANCE_FLOOR:
            raise _CovarianceCollapse(
                "full covariance collapsed (smallest eigenvalue below the floor)"
            )
        return raw + COVARIANCE_FLOOR * np.eye(raw.shape[0])
    variances = np.diagonal(raw)
    if cov_type is CovarianceType.DIAGONAL:
        return variances + COVARIANCE_FLOOR
    return np.float64(np.mean(variances) + COVARIANCE_FLOOR)


def _load(estimator: GaussianHMM, model: GaussianHmm) -> None:
    estimator.startprob_ = np.array(model.start_probs)
    estimator.transmat_ = np.array(model.transitions)
    estimator.means_ = np.array(model.means)
    estimator.covars_ = np.array(model.covariances)


def _estimator(model: GaussianHmm) -> GaussianHMM:
    """One-iteration hmmlearn estimator that starts from ``model``.

    Priors are flat so the M-step is the maximum-likelihood update; the floor
    and the collapse rule are applied afterwards by ``_updated_model``.
    """
    estimator = GaussianHMM(
        n_components=model.n_states,
        covariance_type=_HMMLEARN_COVARIANCE[model.cov_type],
        min_covar=COVARIANCE_FLOOR,
        covars_prior=0.0,
        n_iter=1,
        init_params="",
        params="stmc",
    )
    _load(estimator, model)
    return estimator


def _em_step(estimator: GaussianHMM, X: np.ndarray, lengths: list[int]) -> float:
    """Run one E-step and M-step; returns the log-likelihood before the update."""
    with np.errstate(divide="ignore", invalid="ignore"):
        estimator.fit(X, lengths)
    return float(estimator.monitor_.history[-1])


def _updated_model(estimator: GaussianHMM, previous: GaussianHmm) -> GaussianHmm:
    """Read back an M-step. States and transition rows without posterior mass keep
    their previous parameters."""
    kind = previous.cov_type
    start = np.asarray(estimator.startprob_, dtype=float)

    trans = np.array(estimator.transmat_, dtype=float)
    stale_rows = ~np.all(np.isfinite(trans), axis=1) | (np.abs(trans.sum(axis=1) - 1.0) > 1e-9)
    trans[stale_rows] = previous.transitions[stale_rows]

    means = np.array(estimator.means_, dtype=float)
    raw = np.asarray(estimator.covars_, dtype=float)
    stale = ~np.all(np.isfinite(means), axis=1) | ~np.all(
        np.isfinite(raw.reshape(previous.n_states, -1)), axis=1
    )
    means[stale] = previous.means[stale]
    covs = np.array(previous.covariances)
    for state in np.flatnonzero(~stale):
        covs[state] = _floored(raw[state], kind)
    return GaussianHmm(start, trans, means, covs, kind)


def _initial_model(
    obs_seqs: Sequence[np.ndarray], n_states: int, cov_type: CovarianceType, seed: int
) -> GaussianHmm:
    """Jittered uniform start/transitions, sampled means, pooled data covariance."""
    rng = np.random.default_rng(seed)
    X = np.vstack(obs_seqs)

    start = 1.0 + INIT_JITTER * rng.random(n_states)
    start /= start.sum()
    trans = 1.0 + INIT_JITTER * rng.random((n_states, n_states))
    trans /= trans.sum(axis=1, keepdims=True)
    means = X[rng.choice(X.shape[0], size=n_states, replace=False)]

    pooled = _floored(np.atleast_2d(np.cov(X, rowvar=False, bias=True)), cov_type)
    covs = np.stack([pooled] * n_states)
    return GaussianHmm(start, trans, means, covs, cov_type)


def baum_welch(
    obs_seqs: Sequence[Any],
    n_states: int,
    cov_type: CovarianceType | str = CovarianceType.DIAGONAL,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    init: GaussianHmm | None = None,
) -> FitOutcome:
    """Fit a Gaussian HMM to independent sequences by expectation-maximisation.

    EM steps run on ``hmmlearn``; sequences are passed with ``lengths`` so no
    transition links the end of one sequence to the start of the next.
    Training starts from ``init`` (converted to ``cov_type``) when given,
    otherwise from a seeded initialisation. Stops after ``max_iter`` M-steps
    or when the total log-likelihood gains less than ``tol``, and returns the
    best model seen. A covariance collapse or a non-finite likelihood gives a
    failed outcome.
    """
    if max_iter < 1:
        raise HmmError("max_iter must be at least 1")
    if n_states < 1:
        raise HmmError("n_states must be at least 1")
    kind = CovarianceType(cov_type)
    seqs = [as_observations(obs) for obs in obs_seqs]
    if not seqs:
        raise HmmError("no observation sequences given")
    if len({s.shape[1] for s in seqs}) != 1:
        raise HmmError("observation sequences differ in dimension")
    total = sum(s.shape[0] for s in seqs)
    if total < n_states:
        return FitOutcome.failure(f"{total} observations cannot support {n_states} states")

    if init is not None:
        if (init.n_states, init.dim) != (n_states, seqs[0].shape[1]):
            raise HmmError("initial model does not match n_states and observation dimension")
        model = init.with_cov_type(kind)
    else:
        try:
            model = _initial_model(seqs, n_states, kind, seed)
        except (_CovarianceCollapse, HmmError) as exc:
            return FitOutcome.failure(f"initialisation failed: {exc}")

    X = np.vstack(seqs)
    lengths = [s.shape[0] for s in seqs]
    estimator = _estimator(model)
    history: list[float] = []
    best_loglik, best_model = float("-inf"), model
    iterations = 0
    while True:
        try:
            loglik = _em_step(estimator, X, lengths)
        except (ValueError, np.linalg.LinAlgError) as exc:
            return FitOutcome.failure(f"degenerate EM step: {exc}", iterations, history)
        if not np.isfinite(loglik):
            return FitOutcome.failure("non-finite log-likelihood", iterations, history)
        history.append(loglik)
        if loglik >= best_loglik:
            best_loglik, best_model = loglik, model
        if iterations == max_iter or (iterations and history[-1] - history[-2] < tol):
            break

        try:
            model = _updated_model(estimator, model)
        except _CovarianceCollapse as exc:
            return FitOutcome.failure(str(exc), iterations, history)
        except HmmError as exc:
            return FitOutcome.failure(f"degenerate M-step: {exc}", iterations, history)
        iterations += 1
        _load(estimator, model)

    logger.debug(
        "Baum-Welch: %d states, %s, %d iterations, loglik=%.4f",
        n_states,
        kind.value,
        iterations,
        best_loglik,
    )
    return FitOutcome(
        model=best_model,
        final_loglik=best_loglik,
        iterations=iterations,
        restarts_used=1,
        history=history,
    )


def fit_nested(
    obs_seqs: Sequence[Any],
    n_states: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> dict[CovarianceType, FitOutcome]:
    """Spherical, diagonal and full fits, each started from the previous optimum.

    The spherical fit uses the seeded initialisation. Since every constraint
    contains the one before, the final log-likelihoods are ordered
    spherical <= diagonal <= full.
    """
    outcomes: dict[CovarianceType, FitOutcome] = {}
    start: GaussianHmm | None = None
    for kind in CovarianceType:
        if outcomes and start is None:
            outcomes[kind] = FitOutcome.failure("a more constrained fit failed")
            continue
        outcome = baum_welch(obs_seqs, n_states, kind, max_iter, tol, seed, init=start)
        outcomes[kind] = outcome
        start = outcome.model
    return outcomes


def fit_hmm_restarts(
    obs_seqs: Sequence[Any],
    n_states: int,
    cov_type: CovarianceType | str = CovarianceType.DIAGONAL,
    n_restarts: int = DEFAULT_RESTARTS,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> FitOutcome:
    """Best of ``n_restarts`` Baum-Welch runs; restart ``r`` uses ``seed + r``."""
    if n_restarts < 1:
        raise HmmError("n_restarts must be at least 1")

    best: FitOutcome | None = None
    reasons: list[str] = []
    for restart in range(n_restarts):
        outcome = baum_welch(obs_seqs, n_states, cov_type, max_iter, tol, seed + restart)
        if outcome.failed:
            reasons.append(outcome.reason)
            continue
        if best is None or outcome.final_loglik > best.final_loglik:
            best = outcome

    if best is None:
        failed = FitOutcome.failure(f"all {n_restarts} restarts failed: {reasons[0]}")
        failed.restarts_used = n_restarts
        return failed
    best.restarts_used = n_restarts
    return best
