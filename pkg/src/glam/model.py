"""Generalized lambda models: GLD parameters given as PCEs of the inputs.

``lambda2`` is represented through its logarithm so that it stays positive
for every input.  The conditional likelihood and its gradient live here as
well as the model file format.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend, gld
from .errors import DomainError, UnsupportedError
from .pce import MarginalSpec, PceFunction, TruncationSet, _as_points, design_matrix
from .regression import BasisCache

__all__ = [
    "Dataset",
    "GlamModel",
    "LikelihoodProblem",
    "lambda_at",
    "neg_log_likelihood",
    "neg_log_likelihood_replicated",
    "post_threshold",
    "save_model",
    "load_model",
]

KAPPA = 1e3
DEFAULT_SHAPE_FLOOR = -0.3
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    """Input points and simulator outputs.

    Without ``replications`` there is one output per row of ``X``.  With
    ``replications`` (one positive count per row) ``y`` holds the outputs of
    each point contiguously, in the order of the rows.
    """

    X: np.ndarray
    y: np.ndarray
    replications: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if X.shape[0] < 1:
            raise DomainError("a dataset needs at least one point")
        if not np.all(np.isfinite(y)):
            raise DomainError("outputs must be finite")
        reps = self.replications
        if reps is not None:
            reps = np.asarray(reps, dtype=np.int64).ravel()
            if reps.shape[0] != X.shape[0] or np.any(reps < 1):
                raise DomainError("need one positive replication count per point")
            if reps.sum() != y.shape[0]:
                raise DomainError(f"{y.shape[0]} outputs for {reps.sum()} replications")
        elif y.shape[0] != X.shape[0]:
            raise DomainError(f"{y.shape[0]} outputs for {X.shape[0]} points")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "replications", reps)

    @property
    def n_points(self):
        return self.X.shape[0]

    def flat(self):
        """``(X, y, weights)`` with one row per simulator run.

        Each run of a point with ``R`` replications carries weight ``1/R``.
        """
        if self.replications is None:
            return self.X, self.y, np.ones(self.y.shape[0])
        reps = self.replications
        return np.repeat(self.X, reps, axis=0), self.y, np.repeat(1.0 / reps, reps)


def _block_slices(sizes):
    edges = np.cumsum((0,) + tuple(sizes))
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


class LikelihoodProblem:
    """Negative conditional log-likelihood of a fixed set of PCE bases.

    The coefficient vector ``c`` concatenates the coefficients of
    ``lambda1``, ``log lambda2``, ``lambda3`` and ``lambda4`` in that order.
    Observations outside their conditional support get a finite, linearly
    growing penalty instead of ``-inf`` log-density.
    """

    def __init__(self, marginals, truncations, X, y, weights=None, kappa=KAPPA, cache=None):
        if len(truncations) != 4:
            raise DomainError("need four truncation sets")
        self.marginals = marginals
        self.truncations = tuple(truncations)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.weights = np.ones_like(self.y) if weights is None else np.asarray(weights, dtype=np.float64)
        self.kappa = float(kappa)
        if cache is None:
            cache = BasisCache(marginals, X, max(t.max_degree for t in truncations))
        self.psi = [cache.design(t) for t in self.truncations]
        self.sizes = tuple(len(t) for t in self.truncations)
        self.slices = _block_slices(self.sizes)
        self.n_coef = sum(self.sizes)
        self.total_weight = float(self.weights.sum())

    def split(self, c):
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (self.n_coef,):
            raise DomainError(f"expected {self.n_coef} coefficients, got shape {c.shape}")
        return [c[s] for s in self.slices]

    def lambdas(self, c):
        c1, c2, c3, c4 = self.split(c)
        p1, p2, p3, p4 = self.psi
        with np.errstate(over="ignore"):
            return np.column_stack([p1 @ c1, np.exp(p2 @ c2), p3 @ c3, p4 @ c4])

    def value_and_grad(self, c):
        """Total negative log-likelihood and its gradient."""
        c = np.asarray(c, dtype=np.float64)
        if not np.all(np.isfinite(c)):
            raise DomainError("coefficients must be finite")
        lam = self.lambdas(c)
        if not np.all(np.isfinite(lam)) or np.any(lam[:, 1] <= 0):
            return np.inf, np.full(self.n_coef, np.nan)
        logf, g, status = _backend.loglik_terms(self.y, lam, self.kappa)
        if np.any(status == _backend.STATUS_FAILED):
            return np.inf, np.full(self.n_coef, np.nan)
        w = self.weights
        value = -float(np.sum(w * logf))
        g = -g * w[:, None]
        g[:, 1] *= lam[:, 1]
        grad = np.concatenate([p.T @ g[:, k] for k, p in enumerate(self.psi)])
        return value, grad

    def value(self, c):
        return self.value_and_grad(c)[0]

    def fd_value_and_grad(self, c, step=1e-6):
        """Same as ``value_and_grad`` with central finite differences."""
        c = np.asarray(c, dtype=np.float64)
        value = self.value(c)
        grad = np.empty_like(c)
        for k in range(c.size):
            h = step * max(1.0, abs(c[k]))
            e = np.zeros_like(c)
            e[k] = h
            grad[k] = (self.value(c + e) - self.value(c - e)) / (2.0 * h)
        return value, grad

    def support_margins(self, c):
        """Scaled distances of each observation to its finite support bounds.

        Returns an array of shape ``(2 * n,)``; a negative entry means the
        observation lies outside, ``inf`` means that side is unbounded.
        """
        lam = self.lambdas(c)
        lower, upper = gld.support_bounds(lam)
        l2 = lam[:, 1]
        with np.errstate(invalid="ignore"):
            lo = np.where(np.isfinite(lower), l2 * (self.y - lower), np.inf)
            hi = np.where(np.isfinite(upper), l2 * (upper - self.y), np.inf)
        return np.concatenate([lo, hi])

    def is_active(self, c, tol=1e-8):
        return bool(np.any(self.support_margins(c) <= tol))


def _flat_problem(data, truncations, marginals, weighted):
    X, y, w = data.flat()
    return LikelihoodProblem(marginals, truncations, X, y, w if weighted else None)


def neg_log_likelihood(c, data, truncations, marginals, gradient=False):
    """Negative log-likelihood summed over every output in ``data``.

    Replicated outputs count individually (unit weights).
    """
    prob = _flat_problem(data, truncations, marginals, weighted=False)
    out = prob.value_and_grad(c)
    return out if gradient else out[0]


def neg_log_likelihood_replicated(c, data, truncations, marginals, gradient=False):
    """Negative log-likelihood with each point's replications averaged."""
    prob = _flat_problem(data, truncations, marginals, weighted=True)
    out = prob.value_and_grad(c)
    return out if gradient else out[0]


@dataclass(frozen=True)
class GlamModel:
    """A fitted generalized lambda model.

    ``shape_floor``, when set, floors ``lambda3`` and ``lambda4`` at
    prediction time; the stored coefficients are untouched.
    """

    lambda1: PceFunction
    log_lambda2: PceFunction
    lambda3: PceFunction
    lambda4: PceFunction
    shape_floor: float | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        parts = self.parts
        m = parts[0].marginals
        if any(p.marginals != m for p in parts):
            raise DomainError("all four expansions must share the same marginals")

    @property
    def parts(self):
        return (self.lambda1, self.log_lambda2, self.lambda3, self.lambda4)

    @property
    def marginals(self):
        return self.lambda1.marginals

    @property
    def truncations(self):
        return tuple(p.truncation for p in self.parts)

    @property
    def coefficients(self):
        return np.concatenate([p.coefficients for p in self.parts])

    def lambdas(self, X, threshold=True):
        """GLD parameters at each row of ``X``, shape ``(n, 4)``."""
        X = _as_points(self.marginals, X)
        lam = np.column_stack([design_matrix(self.marginals, p.truncation, X) @ p.coefficients
                               for p in self.parts])
        lam[:, 1] = np.exp(lam[:, 1])
        if threshold and self.shape_floor is not None:
            lam[:, 2:] = np.maximum(lam[:, 2:], self.shape_floor)
        return lam

    def quantile(self, u, x):
        return gld.quantile(u, self.lambdas(x)[0])

    def pdf(self, y, x):
        return gld.pdf(y, self.lambdas(x)[0])

    def mean_variance(self, X):
        lam = self.lambdas(X)
        return gld.mean_variance(lam)

    def expected_payoff(self, X, strike=1.0):
        return gld.expected_payoff(self.lambdas(X), strike)

    def sample(self, x, n, rng):
        return gld.sample(self.lambdas(x)[0], n, rng)

    def to_dict(self):
        return {
            "format": "glam-model",
            "version": FORMAT_VERSION,
            "marginals": self.marginals.to_dict(),
            "parameters": [
                {"name": name, "truncation": p.truncation.to_dict(), "coefficients": p.coefficients.tolist()}
                for name, p in zip(("lambda1", "log_lambda2", "lambda3", "lambda4"), self.parts)
            ],
            "shape_floor": self.shape_floor,
            "metadata": _jsonable(self.metadata),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "glam-model":
            raise UnsupportedError("not a model document")
        if d.get("version") != FORMAT_VERSION:
            raise UnsupportedError(f"unsupported model format version {d.get('version')!r}")
        marginals = MarginalSpec.from_dict(d["marginals"])
        parts = [PceFunction(TruncationSet.from_dict(p["truncation"]),
                             np.asarray(p["coefficients"], dtype=np.float64), marginals)
                 for p in d["parameters"]]
        floor = d.get("shape_floor")
        return cls(*parts, shape_floor=None if floor is None else float(floor),
                   metadata=dict(d.get("metadata", {})))

    @classmethod
    def from_coefficients(cls, marginals, truncations, c, shape_floor=None, metadata=None):
        sizes = [len(t) for t in truncations]
        blocks = [np.asarray(c, dtype=np.float64)[s] for s in _block_slices(sizes)]
        parts = [PceFunction(t, b, marginals) for t, b in zip(truncations, blocks)]
        return cls(*parts, shape_floor=shape_floor, metadata=dict(metadata or {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def lambda_at(model, x, threshold=True):
    """GLD parameters of ``model`` at a single input point."""
    lam = model.lambdas(np.asarray(x, dtype=np.float64).reshape(1, -1), threshold=threshold)[0]
    return gld.LambdaVector(*(float(v) for v in lam))


def post_threshold(model, floor=DEFAULT_SHAPE_FLOOR):
    """Copy of ``model`` whose shape parameters are floored at ``floor`` when evaluated."""
    return replace(model, shape_floor=float(floor), metadata=dict(model.metadata))


def save_model(model, path):
    """Write ``model`` as JSON.

    Floats use the shortest representation that reads back to the same
    double, so predictions of the reloaded model are bit-identical.
    """
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1, allow_nan=False)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return GlamModel.from_dict(json.load(fh))
