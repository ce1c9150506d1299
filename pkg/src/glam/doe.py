"""Experimental designs: Latin hypercube samples and replicated layouts."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["Design", "lhs", "replicated_design"]


@dataclass(frozen=True)
class Design:
    """Distinct input points, each to be evaluated ``replications`` times."""

    points: np.ndarray
    replications: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.points.shape[0] < 1:
            raise DomainError("a design needs at least one point")
        if self.replications < 1:
            raise DomainError("replications must be positive")

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def n_runs(self):
        return self.n_points * self.replications

    def replication_counts(self):
        return np.full(self.n_points, self.replications, dtype=np.int64)


def _unit_lhs(n, dim, rng):
    u = np.empty((n, dim))
    for k in range(dim):
        u[:, k] = (rng.permutation(n) + rng.random(n)) / n
    return u


def lhs(n, marginals, rng, seed=None):
    """Latin hypercube sample of ``n`` points mapped through the marginals.

    Each coordinate has exactly one point in each of ``n`` equal-probability
    strata, placed uniformly at random within its stratum.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    return Design(marginals.ppf(_unit_lhs(int(n), marginals.dim, rng)), 1, seed)


def replicated_design(n_total, replications, marginals, rng, seed=None):
    """LHS of ``n_total / replications`` points, each replicated."""
    if replications < 1 or n_total % replications:
        raise DomainError(f"{replications} replications do not divide {n_total} runs")
    base = lhs(n_total // replications, marginals, rng, seed)
    return Design(base.points, int(replications), seed)
