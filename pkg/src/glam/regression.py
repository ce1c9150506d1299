"""Least-squares PCE regression: ordinary, weighted and degree/q-norm adaptive."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConditioningError, DomainError, UnderdeterminedError
from .pce import _as_points, enumerate_truncation, to_standard, univariate_table

__all__ = ["LsqFit", "ols", "wls", "adaptive_ols", "BasisCache"]

MAX_CONDITION = 1e10
OVERSAMPLING = 1.1


@dataclass(frozen=True)
class LsqFit:
    """Result of a least-squares fit.

    ``loo_error`` is the leave-one-out error divided by the empirical variance
    of the (weighted) response; ``condition`` is a 1-norm condition estimate of
    the design matrix.
    """

    coefficients: np.ndarray
    loo_error: float
    truncation: object
    condition: float


class BasisCache:
    """Univariate polynomial tables for a fixed set of points.

    Building the design matrix of any truncation set then costs only the
    column products, which makes scanning a (p, q) grid cheap.
    """

    def __init__(self, marginals, X, max_degree):
        self.marginals = marginals
        z = to_standard(marginals, _as_points(marginals, X))
        self.n = z.shape[0]
        self.tables = [univariate_table(m.family, max_degree, z[:, k]) for k, m in enumerate(marginals)]

    def design(self, truncation):
        idx = truncation.indices
        psi = np.ones((self.n, idx.shape[0]))
        for k, table in enumerate(self.tables):
            if idx[:, k].any():
                psi *= table[:, idx[:, k]]
        return psi


def _lstsq(psi, y):
    n, p = psi.shape
    if n <= p:
        raise UnderdeterminedError(f"{n} data points for {p} unknowns")
    q, r = np.linalg.qr(psi)
    rcond, info = linalg.lapack.dtrcon(r, norm="1", uplo="U", diag="N")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(f"design matrix condition estimate {cond:.3g} exceeds {MAX_CONDITION:.0e}")
    coef = linalg.solve_triangular(r, q.T @ y)
    h = np.einsum("ij,ij->i", q, q)
    resid = y - psi @ coef
    with np.errstate(divide="ignore", invalid="ignore"):
        press = np.mean((resid / (1.0 - h)) ** 2)
    var = np.var(y)
    if not var > 0:
        # constant response: normalize by its magnitude instead
        var = max(float(np.mean(y * y)), 1e-300)
    loo = press / var
    if not np.isfinite(loo):
        loo = np.inf
    return coef, float(loo), float(cond)


def ols(marginals, truncation, X, y, psi=None):
    """Ordinary least squares on the basis of ``truncation``."""
    y = np.asarray(y, dtype=np.float64)
    if psi is None:
        psi = BasisCache(marginals, X, truncation.indices.max()).design(truncation)
    coef, loo, cond = _lstsq(psi, y)
    return LsqFit(coef, loo, truncation, cond)


def wls(marginals, truncation, X, y, variances, psi=None):
    """Weighted least squares minimizing ``sum (y_i - (Psi c)_i)**2 / v_i``."""
    v = np.asarray(variances, dtype=np.float64)
    if np.any(~(v > 0)) or not np.all(np.isfinite(v)):
        raise DomainError("weights (variances) must be positive and finite")
    y = np.asarray(y, dtype=np.float64)
    if psi is None:
        psi = BasisCache(marginals, X, truncation.indices.max()).design(truncation)
    s = 1.0 / np.sqrt(v)
    coef, loo, cond = _lstsq(psi * s[:, None], y * s)
    return LsqFit(coef, loo, truncation, cond)


def adaptive_ols(marginals, X, y, p_list, q_list, cache=None):
    """OLS over every feasible ``(p, q)`` pair; keep the lowest LOO error.

    Pairs with ``N < 1.1 P`` or an ill-conditioned design are skipped.  Errors
    within 1e-12 of the best count as ties and go to the smaller basis, then
    smaller ``p``, then smaller ``q``.
    Returns ``(fit, (p, q))``.
    """
    p_list = sorted(set(int(p) for p in p_list))
    q_list = sorted(set(float(q) for q in q_list))
    if not p_list or not q_list:
        raise DomainError("degree and q-norm lists must be non-empty")
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if cache is None:
        cache = BasisCache(marginals, X, max(p_list))

    seen = {}
    candidates = []
    for p in p_list:
        for q in q_list:
            trunc = enumerate_truncation(p, q, marginals.dim)
            key = trunc.indices.tobytes()
            if key in seen:
                fit = seen[key]
            else:
                fit = None
                if n >= OVERSAMPLING * len(trunc):
                    try:
                        coef, loo, cond = _lstsq(cache.design(trunc), y)
                    except (ConditioningError, UnderdeterminedError):
                        pass
                    else:
                        fit = LsqFit(coef, loo, trunc, cond)
                seen[key] = fit
            if fit is not None:
                candidates.append((fit, p, q))
    if not candidates:
        raise UnderdeterminedError("no feasible (p, q) pair for this number of data points")

    best = min(c[0].loo_error for c in candidates)
    tied = [c for c in candidates if c[0].loo_error <= best + 1e-12]
    fit, p, q = min(tied, key=lambda c: (len(c[0].truncation), c[1], c[2]))
    return LsqFit(fit.coefficients, fit.loo_error, enumerate_truncation(p, q, marginals.dim),
                  fit.condition), (p, q)
