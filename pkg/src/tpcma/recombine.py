"""Fitness ranking and weighted recombination of the sampled steps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sampler import Offspring

__all__ = ["RankedPopulation", "rank", "weighted_mean_step", "update_mean"]


@dataclass(frozen=True)
class RankedPopulation:
    """Evaluated offspring with their selection order (best first, 0-based).

    The sort is stable and ascending in fitness (minimization); ties keep
    sampling order.  Failed evaluations must be mapped to +inf by the
    caller so they rank last.
    """

    members: tuple[tuple[Offspring, float], ...]
    fitness: np.ndarray
    order: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def n_infeasible(self) -> int:
        return int(np.sum(np.isinf(self.fitness)))

    def best(self) -> tuple[Offspring, float]:
        i = int(self.order[0])
        return self.members[i]

    def selected_steps(self, mu: int) -> np.ndarray:
        """The y vectors of the mu best offspring, as a (mu, n) matrix."""
        return np.stack([self.members[int(i)][0].y for i in self.order[:mu]])


def rank(members: Sequence[tuple[Offspring, float]]) -> RankedPopulation:
    """Stable ascending sort of (offspring, fitness) pairs.

    NaN fitness is rejected: evaluation failures must be represented as
    +inf explicitly.
    """
    fitness = np.array([float(f) for _, f in members])
    if np.isnan(fitness).any():
        raise ValueError("NaN fitness; map failed evaluations to +inf instead")
    order = np.argsort(fitness, kind="stable")
    return RankedPopulation(members=tuple(members), fitness=fitness, order=order)


def weighted_mean_step(ranked: RankedPopulation, weights: np.ndarray) -> np.ndarray:
    """Weighted mean of the mu best sampled steps, sum_i w_i y_(i)."""
    mu = len(weights)
    if mu > ranked.size:
        raise ValueError(f"need {mu} selected offspring but population has {ranked.size}")
    return np.asarray(weights, dtype=float) @ ranked.selected_steps(mu)


def update_mean(m: np.ndarray, sigma: float, mean_step: np.ndarray) -> np.ndarray:
    """New distribution mean m + sigma * mean step.

    With weights summing to one this equals the weighted mean of the mu
    best candidate solutions.
    """
    if not math.isfinite(sigma):
        raise ValueError(f"sigma must be finite, got {sigma}")
    return np.asarray(m, dtype=float) + sigma * np.asarray(mean_step, dtype=float)
