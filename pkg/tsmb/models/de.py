"""Differential Evolution for box-constrained continuous objectives.

Strategy is DE/rand/1/bin: uniform random initialisation inside the bounds,
binomial crossover with one forced coordinate, clip-to-bounds repair and
greedy one-to-one selection. A whole generation of trials is built before any
selection happens, so the trial population can be evaluated in one call when
the objective is vectorised.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from tsmb.exceptions import OptimizationError

logger = logging.getLogger(__name__)

MIN_POPULATION = 4


class DeParams(BaseModel):
    """Differential Evolution settings (generations, F, CR, population factor, tol)."""

    model_config = ConfigDict(frozen=True)

    max_iter: int = Field(default=150, ge=1)
    mutation: float = Field(default=0.5, gt=0.0, lt=2.0)
    recombination: float = Field(default=0.5, ge=0.0, le=1.0)
    popsize_factor: int = Field(default=10, ge=1)
    tol: float = Field(default=0.01, ge=0.0)

    def population_size(self, dim: int) -> int:
        return max(MIN_POPULATION, self.popsize_factor * dim)


@dataclass
class DeResult:
    """Outcome of one optimisation run."""

    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool = False
    best_history: list[float] = field(default_factory=list)


class DifferentialEvolutionSolver:
    """Minimises ``objective`` over the box given by ``bounds``.

    Args:
        objective: ``f(x) -> float`` or, with ``vectorized=True``,
            ``f(X) -> array`` where ``X`` has one trial per row.
        bounds: ``(lo, hi)`` pair per dimension, ``lo < hi``.
        params: Differential Evolution settings.
        seed: Seed for the solver's private generator.
        seeds_in_population: Vectors that replace the first random members of
            the initial population.
        vectorized: Whether ``objective`` accepts a 2-D population array.
    """

    def __init__(
        self,
        objective: Callable[[np.ndarray], float | np.ndarray],
        bounds: Sequence[Sequence[float]],
        params: DeParams | None = None,
        seed: int = 0,
        seeds_in_population: Sequence[Sequence[float]] | None = None,
        vectorized: bool = False,
    ):
        limits = np.asarray(bounds, dtype=float)
        if limits.ndim != 2 or limits.shape[1] != 2 or limits.shape[0] == 0:
            raise ValueError("bounds must be a non-empty sequence of (lo, hi) pairs")
        if np.any(limits[:, 0] >= limits[:, 1]):
            raise ValueError("every bound needs lo < hi")

        self.objective = objective
        self.lower = limits[:, 0]
        self.upper = limits[:, 1]
        self.dim = limits.shape[0]
        self.params = params or DeParams()
        self.vectorized = vectorized
        self.rng = np.random.default_rng(seed)
        self.nfev = 0

        size = self.params.population_size(self.dim)
        self.population = self.lower + self.rng.random((size, self.dim)) * (
            self.upper - self.lower
        )
        if seeds_in_population is not None:
            injected = np.atleast_2d(np.asarray(seeds_in_population, dtype=float))
            if injected.shape[1] != self.dim:
                raise ValueError(
                    f"seeded vectors have dimension {injected.shape[1]}, expected {self.dim}"
                )
            if len(injected) > size:
                raise ValueError("more seeded vectors than population members")
            if np.any(injected < self.lower) or np.any(injected > self.upper):
                raise ValueError("seeded vectors must lie within the bounds")
            self.population[: len(injected)] = injected

        self.energies = self._evaluate(self.population)

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def _evaluate(self, trials: np.ndarray) -> np.ndarray:
        if self.vectorized:
            values = np.asarray(self.objective(trials), dtype=float).reshape(-1)
            if values.shape[0] != trials.shape[0]:
                raise ValueError("vectorised objective returned the wrong number of values")
        else:
            values = np.array([float(self.objective(trial)) for trial in trials])
        self.nfev += trials.shape[0]

        bad = ~np.isfinite(values)
        if bad.any():
            offending = trials[int(np.argmax(bad))].copy()
            raise OptimizationError(
                f"objective returned a non-finite value ({values[bad][0]})", vector=offending
            )
        return values

    # ------------------------------------------------------------------
    # Evolution
    # ------------------------------------------------------------------

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.energies))

    @property
    def converged(self) -> bool:
        spread = float(np.std(self.energies))
        return spread <= self.params.tol * abs(float(np.mean(self.energies)))

    def _donor_indices(self) -> np.ndarray:
        """Three mutually distinct indices per member, none equal to the member."""
        size = self.population.shape[0]
        picked = np.arange(size)[:, None]
        for k in range(3):
            draw = self.rng.integers(0, size - 1 - k, size=size)
            # shift past already excluded indices, smallest first
            for excluded in np.sort(picked, axis=1).T:
                draw = draw + (draw >= excluded)
            picked = np.column_stack([picked, draw])
        return picked[:, 1:]

    def _trial_population(self) -> np.ndarray:
        donors = self._donor_indices()
        base = self.population[donors[:, 0]]
        mutants = base + self.params.mutation * (
            self.population[donors[:, 1]] - self.population[donors[:, 2]]
        )
        size = self.population.shape[0]
        crossover = self.rng.random((size, self.dim)) < self.params.recombination
        crossover[np.arange(size), self.rng.integers(self.dim, size=size)] = True
        trials = np.where(crossover, mutants, self.population)
        return np.clip(trials, self.lower, self.upper)

    def step(self) -> float:
        """Run one generation and return the best value afterwards."""
        trials = self._trial_population()
        trial_energies = self._evaluate(trials)

        improved = trial_energies < self.energies
        self.population[improved] = trials[improved]
        self.energies[improved] = trial_energies[improved]
        return float(self.energies[self.best_index])

    def solve(self) -> DeResult:
        history: list[float] = []
        converged = False
        nit = 0
        for nit in range(1, self.params.max_iter + 1):
            history.append(self.step())
            if nit % 25 == 0:
                logger.debug("DE generation %d: best=%.6g", nit, history[-1])
            if self.converged:
                converged = True
                break

        best = self.best_index
        return DeResult(
            x=self.population[best].copy(),
            fun=float(self.energies[best]),
            nit=nit,
            nfev=self.nfev,
            converged=converged,
            best_history=history,
        )


def de_optimize(
    objective: Callable[[np.ndarray], float | np.ndarray],
    bounds: Sequence[Sequence[float]],
    params: DeParams | None = None,
    seed: int = 0,
    seeds_in_population: Sequence[Sequence[float]] | None = None,
    vectorized: bool = False,
) -> DeResult:
    """Minimise ``objective`` inside ``bounds`` with DE/rand/1/bin.

    Returns the best vector ever evaluated, its value and the number of
    generations used. Raises OptimizationError when the objective produces a
    non-finite value; the error carries the offending vector.
    """
    solver = DifferentialEvolutionSolver(
        objective,
        bounds,
        params=params,
        seed=seed,
        seeds_in_population=seeds_in_population,
        vectorized=vectorized,
    )
    return solver.solve()
