"""Orthonormal polynomial bases and polynomial chaos expansions.

Uniform inputs use normalized Legendre polynomials on ``[-1, 1]``, Gaussian
inputs normalized probabilists' Hermite polynomials.  Inputs are mapped to
these standard domains by affine transforms.
"""

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, UnsupportedError

__all__ = [
    "Uniform",
    "Gaussian",
    "MarginalSpec",
    "TruncationSet",
    "PceFunction",
    "univariate_eval",
    "univariate_table",
    "to_standard",
    "from_standard",
    "enumerate_truncation",
    "design_matrix",
    "pce_eval",
]

MAX_DEGREE = 30


@dataclass(frozen=True)
class Uniform:
    lower: float
    upper: float
    family = "uniform"

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DomainError(f"uniform bounds must satisfy lower < upper, got {self.lower}, {self.upper}")

    def to_standard(self, x):
        return 2.0 * (x - self.lower) / (self.upper - self.lower) - 1.0

    def from_standard(self, z):
        return self.lower + (z + 1.0) * (self.upper - self.lower) / 2.0

    def ppf(self, u):
        return self.lower + u * (self.upper - self.lower)

    def to_dict(self):
        return {"family": "uniform", "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Gaussian:
    mean: float
    std: float
    family = "gaussian"

    def __post_init__(self):
        if not self.std > 0:
            raise DomainError(f"gaussian std must be positive, got {self.std}")

    def to_standard(self, x):
        return (x - self.mean) / self.std

    def from_standard(self, z):
        return self.mean + self.std * z

    def ppf(self, u):
        return self.mean + self.std * stats.norm.ppf(u)

    def to_dict(self):
        return {"family": "gaussian", "mean": self.mean, "std": self.std}


def _marginal_from_dict(d):
    family = d.get("family")
    if family == "uniform":
        return Uniform(float(d["lower"]), float(d["upper"]))
    if family == "gaussian":
        return Gaussian(float(d["mean"]), float(d["std"]))
    raise UnsupportedError(f"unsupported marginal family {family!r}")


@dataclass(frozen=True)
class MarginalSpec:
    """Independent marginals, one per input dimension."""

    marginals: tuple

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        for m in self.marginals:
            if not isinstance(m, (Uniform, Gaussian)):
                raise UnsupportedError(f"unsupported marginal {m!r}; only Uniform and Gaussian are available")

    @property
    def dim(self):
        return len(self.marginals)

    def __len__(self):
        return len(self.marginals)

    def __iter__(self):
        return iter(self.marginals)

    def ppf(self, u):
        """Map points of the unit hypercube through the marginal inverse CDFs."""
        u = np.atleast_2d(u)
        return np.column_stack([m.ppf(u[:, k]) for k, m in enumerate(self.marginals)])

    def to_dict(self):
        return [m.to_dict() for m in self.marginals]

    @classmethod
    def from_dict(cls, items):
        return cls(tuple(_marginal_from_dict(d) for d in items))


def _as_points(marginals, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1) if x.size == marginals.dim else x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] != marginals.dim:
        raise DomainError(f"expected points of dimension {marginals.dim}, got shape {x.shape}")
    return x


def to_standard(marginals, x):
    """Affine map of input points to the standard polynomial domains.

    ``x`` is a single point (1-d) or a matrix of points (rows).  Uniform
    coordinates outside their bounds raise :class:`DomainError`.
    """
    single = np.ndim(x) == 1 and np.size(x) == marginals.dim
    x = _as_points(marginals, x)
    z = np.empty_like(x)
    for k, m in enumerate(marginals):
        col = x[:, k]
        if isinstance(m, Uniform):
            # exact comparison: points on the bounds are valid
            if np.any((col < m.lower) | (col > m.upper)) or np.any(np.isnan(col)):
                raise DomainError(f"input {k} outside uniform bounds [{m.lower}, {m.upper}]")
        elif not np.all(np.isfinite(col)):
            raise DomainError(f"input {k} must be finite")
        z[:, k] = m.to_standard(col)
    return z[0] if single else z


def from_standard(marginals, z):
    single = np.ndim(z) == 1 and np.size(z) == marginals.dim
    z = _as_points(marginals, z)
    x = np.column_stack([m.from_standard(z[:, k]) for k, m in enumerate(marginals)])
    return x[0] if single else x


def univariate_table(family, kmax, x):
    """Orthonormal polynomials of degrees ``0..kmax`` at ``x``.

    Returns an array of shape ``x.shape + (kmax + 1,)``.
    """
    if kmax < 0:
        raise DomainError("degree must be non-negative")
    if kmax > MAX_DEGREE:
        raise UnsupportedError(f"degrees above {MAX_DEGREE} are not supported")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape + (kmax + 1,))
    out[..., 0] = 1.0
    if family == "uniform":
        # Legendre: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
        if kmax >= 1:
            out[..., 1] = x
        for k in range(1, kmax):
            out[..., k + 1] = ((2 * k + 1) * x * out[..., k] - k * out[..., k - 1]) / (k + 1)
        out *= np.sqrt(2.0 * np.arange(kmax + 1) + 1.0)
    elif family == "gaussian":
        # normalized Hermite: psi_{k+1} = (x psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1)
        if kmax >= 1:
            out[..., 1] = x
        for k in range(1, kmax):
            out[..., k + 1] = (x * out[..., k] - math.sqrt(k) * out[..., k - 1]) / math.sqrt(k + 1)
    else:
        raise UnsupportedError(f"unsupported marginal family {family!r}")
    return out


def univariate_eval(family, k, x):
    """Degree-``k`` orthonormal polynomial at standardized ``x``."""
    out = univariate_table(family, k, x)[..., k]
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TruncationSet:
    """Multi-indices of a polynomial basis in graded lexicographic order.

    ``indices`` has shape ``(P, M)``.  ``p`` and ``q`` record the hyperbolic
    truncation that produced the set, if any.
    """

    indices: np.ndarray
    p: int | None = None
    q: float | None = None

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64, copy=True)
        if idx.ndim != 2 or idx.shape[0] == 0:
            raise DomainError("a truncation set needs a non-empty (P, M) index array")
        if np.any(idx < 0):
            raise DomainError("multi-index components must be non-negative")
        order = sorted(range(len(idx)), key=lambda j: _graded_key(idx[j]))
        idx = idx[order]
        if len({tuple(r) for r in idx}) != len(idx):
            raise DomainError("duplicate multi-indices")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.indices.shape[0]

    @property
    def dim(self):
        return self.indices.shape[1]

    @property
    def max_degree(self):
        return int(self.indices.sum(axis=1).max())

    def __contains__(self, alpha):
        return any(tuple(r) == tuple(alpha) for r in self.indices)

    def as_tuples(self):
        return [tuple(int(v) for v in r) for r in self.indices]

    def issubset(self, other):
        mine = set(self.as_tuples())
        return mine <= set(other.as_tuples())

    def __eq__(self, other):
        return isinstance(other, TruncationSet) and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash(self.indices.tobytes()) ^ hash(self.indices.shape)

    def to_dict(self):
        return {"p": self.p, "q": self.q, "indices": self.indices.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["indices"], dtype=np.int64).reshape(len(d["indices"]), -1),
                   d.get("p"), d.get("q"))

    @classmethod
    def constant(cls, dim):
        return enumerate_truncation(0, 1.0, dim)


def _graded_key(alpha):
    return (int(sum(alpha)), tuple(-int(a) for a in alpha))


@functools.lru_cache(maxsize=256)
def enumerate_truncation(p, q, dim):
    """Hyperbolic truncation set ``{alpha : ||alpha||_q <= p}``.

    Uses a relative tolerance of 1e-12 on the q-norm boundary; ``q = 1`` is
    decided in exact integer arithmetic.
    """
    if p < 0 or int(p) != p:
        raise DomainError("p must be a non-negative integer")
    if not 0 < q <= 1:
        raise DomainError("q must lie in (0, 1]")
    if dim < 1:
        raise DomainError("dimension must be at least 1")
    p = int(p)
    keep = []
    for total in range(p + 1):
        for alpha in _compositions(total, dim):
            if q == 1.0:
                ok = True
            else:
                s = sum(a ** q for a in alpha if a)
                ok = s ** (1.0 / q) <= p * (1.0 + 1e-12)
            if ok:
                keep.append(alpha)
    return TruncationSet(np.array(keep, dtype=np.int64).reshape(len(keep), dim), p, float(q))


def _compositions(total, dim):
    # all non-negative integer vectors of length dim summing to total
    if dim == 1:
        yield (total,)
        return
    for bars in itertools.combinations(range(total + dim - 1), dim - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(total + dim - 2 - prev)
        yield tuple(parts)


def design_matrix(marginals, truncation, points):
    """Matrix of basis values, one row per point and one column per index."""
    z = to_standard(marginals, _as_points(marginals, points))
    idx = truncation.indices
    if idx.shape[1] != marginals.dim:
        raise DomainError("truncation dimension does not match the marginals")
    psi = np.ones((z.shape[0], idx.shape[0]))
    for k, m in enumerate(marginals):
        kmax = int(idx[:, k].max())
        if kmax == 0:
            continue
        table = univariate_table(m.family, kmax, z[:, k])
        psi *= table[:, idx[:, k]]
    return psi


@dataclass(frozen=True)
class PceFunction:
    """A scalar function ``sum_alpha c_alpha psi_alpha(x)``."""

    truncation: TruncationSet
    coefficients: np.ndarray
    marginals: MarginalSpec

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.float64, copy=True).ravel()
        if c.size != len(self.truncation):
            raise DomainError(f"{c.size} coefficients for a basis of size {len(self.truncation)}")
        if not np.all(np.isfinite(c)):
            raise DomainError("PCE coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def __call__(self, x):
        return pce_eval(self, x)


def pce_eval(f, x):
    """Evaluate a PCE at one point (returns a float) or at rows of points."""
    single = np.ndim(x) == 1 and np.size(x) == f.marginals.dim
    psi = design_matrix(f.marginals, f.truncation, np.atleast_2d(x) if single else x)
    out = psi @ f.coefficients
    return float(out[0]) if single else out
