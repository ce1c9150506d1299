"""Generalized lambda distribution, FKML parametrization.

The distribution is defined through its quantile function

    Q(u) = l1 + ((u**l3 - 1) / l3 - ((1 - u)**l4 - 1) / l4) / l2

with ``l2 > 0``.  Functions accept ``lam`` either as a single 4-vector or as an
array whose last axis holds the four parameters; other arguments broadcast
against the leading axes.
"""

from typing import NamedTuple

import numpy as np
from scipy import special

from . import _backend
from ._kernels_py import _boxcox, _boxcox_dlam, _logs
from .errors import ConvergenceError, DomainError, NonexistentMomentError, OutsideSupportError

__all__ = [
    "LambdaVector",
    "SupportInterval",
    "as_lambda",
    "quantile",
    "quantile_logit",
    "quantile_density",
    "invert_quantile",
    "pdf",
    "logpdf",
    "cdf",
    "support_bounds",
    "mean_variance",
    "sample",
    "expected_payoff",
    "quantile_partials",
]

SAMPLE_EPS = 1e-15
# below this magnitude of a shape parameter the cross moment is integrated
# numerically instead of through the beta-function expression
_CROSS_MOMENT_SWITCH = 0.05


class LambdaVector(NamedTuple):
    """The four GLD parameters at one input point."""

    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float


class SupportInterval(NamedTuple):
    lower: float
    upper: float


def as_lambda(lam):
    """Return ``lam`` as a float array with last axis of length 4, validated."""
    arr = np.asarray(lam, dtype=np.float64)
    if arr.shape[-1:] != (4,):
        raise DomainError(f"lambda must have a last axis of length 4, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("lambda components must be finite")
    if np.any(arr[..., 1] <= 0.0):
        raise DomainError("lambda2 must be strictly positive")
    return arr


def _split(lam):
    return lam[..., 0], lam[..., 1], lam[..., 2], lam[..., 3]


def _flat_pair(x, lam):
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=np.float64)
    shape = np.broadcast_shapes(x.shape, lam.shape[:-1])
    xf = np.broadcast_to(x, shape).ravel()
    lf = np.broadcast_to(lam, shape + (4,)).reshape(-1, 4)
    return xf, lf, shape


def _unwrap(arr, shape):
    arr = arr.reshape(shape)
    return arr[()] if arr.ndim == 0 else arr


def quantile(u, lam):
    """Quantile function ``Q(u; lam)``; ``u`` in ``[0, 1]``.

    The endpoints map to the support bounds, which may be infinite.
    """
    lam = as_lambda(lam)
    u = np.asarray(u, dtype=np.float64)
    if np.any((u < 0.0) | (u > 1.0)) or np.any(np.isnan(u)):
        raise DomainError("u must lie in [0, 1]")
    l1, l2, l3, l4 = _split(lam)
    with np.errstate(divide="ignore"):
        lu = np.log(u)
        l1u = np.log1p(-u)
    out = l1 + (_boxcox(l3, lu) - _boxcox(l4, l1u)) / l2
    return out[()] if np.ndim(out) == 0 else out


def quantile_logit(t, lam):
    """Quantile function evaluated at ``u = 1 / (1 + exp(-t))``.

    Resolves probabilities much closer to 0 and 1 than ``quantile`` can.
    """
    lam = as_lambda(lam)
    l1, l2, l3, l4 = _split(lam)
    lu, l1u = _logs(np.asarray(t, dtype=np.float64))
    out = l1 + (_boxcox(l3, lu) - _boxcox(l4, l1u)) / l2
    return out[()] if np.ndim(out) == 0 else out


def quantile_density(u, lam):
    """Derivative ``Q'(u) = (u**(l3-1) + (1-u)**(l4-1)) / l2`` for ``u`` in (0, 1)."""
    lam = as_lambda(lam)
    u = np.asarray(u, dtype=np.float64)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("u must lie in the open interval (0, 1)")
    _, l2, l3, l4 = _split(lam)
    out = (np.exp((l3 - 1.0) * np.log(u)) + np.exp((l4 - 1.0) * np.log1p(-u))) / l2
    return out[()] if np.ndim(out) == 0 else out


def support_bounds(lam):
    """Lower and upper end of the support; infinite when the shape is <= 0."""
    lam = as_lambda(lam)
    l1, l2, l3, l4 = _split(lam)
    with np.errstate(divide="ignore", over="ignore"):
        lower = np.where(l3 > 0.0, l1 - 1.0 / (l2 * l3), -np.inf)
        upper = np.where(l4 > 0.0, l1 + 1.0 / (l2 * l4), np.inf)
    if lower.ndim == 0:
        return SupportInterval(float(lower), float(upper))
    return SupportInterval(lower, upper)


def _solve(y, lam):
    yf, lf, shape = _flat_pair(y, lam)
    t, status = _backend.invert_logit(yf, lf)
    if np.any(status == _backend.STATUS_FAILED):
        raise ConvergenceError("quantile inversion did not converge")
    return yf, lf, t, status, shape


def invert_quantile(y, lam, tol=1e-10):
    """Probability ``u`` with ``Q(u; lam) = y`` for a scalar ``y``.

    Raises :class:`OutsideSupportError` when ``y`` is outside the support and
    :class:`ConvergenceError` when the root cannot be located to within
    ``tol * max(1, |y|)``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    lam = as_lambda(lam)
    if lam.ndim != 1:
        raise DomainError("invert_quantile takes a single parameter vector")
    y = float(y)
    lower, upper = support_bounds(lam)
    if y < lower or y > upper or np.isnan(y):
        raise OutsideSupportError(f"{y!r} is outside the support [{lower}, {upper}]")
    if y == lower:
        return 0.0
    if y == upper:
        return 1.0
    _, _, t, _, _ = _solve(y, lam)
    t = float(t[0])
    if abs(quantile_logit(t, lam) - y) > tol * max(1.0, abs(y)):
        raise ConvergenceError(f"quantile inversion residual above tolerance at y={y!r}")
    return float(special.expit(t))


def logpdf(y, lam):
    """Log-density; ``-inf`` outside the support."""
    yf, lf, t, status, shape = _solve(y, lam)
    lu, l1u = _logs(t)
    l3, l4 = lf[:, 2], lf[:, 3]
    out = np.log(lf[:, 1]) - np.logaddexp((l3 - 1.0) * lu, (l4 - 1.0) * l1u)
    lower, upper = support_bounds(lf)
    out[(yf < lower) | (yf > upper)] = -np.inf
    return _unwrap(out, shape)


def pdf(y, lam):
    """Density ``1 / Q'(u)`` at ``u = Q^{-1}(y)``; zero outside the support."""
    return np.exp(logpdf(y, lam))


def cdf(y, lam):
    """Distribution function, clamped to 0 below and 1 above the support."""
    yf, lf, t, status, shape = _solve(y, lam)
    u = special.expit(t)
    lower, upper = support_bounds(lf)
    u[yf <= lower] = 0.0
    u[yf >= upper] = 1.0
    return _unwrap(u, shape)


def _cross_moment_quad(a, b):
    # E[(u**a - 1)/a * ((1-u)**b - 1)/b] by the trapezoid rule in logit space;
    # the integrand decays like exp(-1.5 |t|) or faster for shapes > -0.5
    t = np.linspace(-60.0, 60.0, 2401)
    h = t[1] - t[0]
    lu, l1u = _logs(t)
    w = np.exp(lu + l1u) * h
    a = np.asarray(a)[..., None]
    b = np.asarray(b)[..., None]
    return np.sum(_boxcox(a, lu) * _boxcox(b, l1u) * w, axis=-1)


def _cross_moment(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    near = (np.abs(a) < _CROSS_MOMENT_SWITCH) | (np.abs(b) < _CROSS_MOMENT_SWITCH)
    a_safe = np.where(near, 1.0, a)
    b_safe = np.where(near, 1.0, b)
    beta = np.exp(special.betaln(a_safe + 1.0, b_safe + 1.0))
    out = (beta - 1.0 / (a_safe + 1.0) - 1.0 / (b_safe + 1.0) + 1.0) / (a_safe * b_safe)
    if np.any(near):
        out = np.where(near, _cross_moment_quad(np.where(near, a, 0.0), np.where(near, b, 0.0)), out)
    return out


def mean_variance(lam):
    """Mean and variance; both shapes must exceed -0.5."""
    lam = as_lambda(lam)
    l1, l2, l3, l4 = _split(lam)
    if np.any(l3 <= -0.5) or np.any(l4 <= -0.5):
        raise NonexistentMomentError("variance does not exist for lambda3 or lambda4 <= -0.5")
    ea = -1.0 / (l3 + 1.0)
    eb = -1.0 / (l4 + 1.0)
    mean = l1 + (ea - eb) / l2
    var_a = 1.0 / ((2.0 * l3 + 1.0) * (l3 + 1.0) ** 2)
    var_b = 1.0 / ((2.0 * l4 + 1.0) * (l4 + 1.0) ** 2)
    cov = _cross_moment(l3, l4) - ea * eb
    var = (var_a + var_b - 2.0 * cov) / (l2 * l2)
    if np.ndim(mean) == 0:
        return float(mean), float(var)
    return mean, var


def sample(lam, n, rng):
    """Inverse-transform sample of size ``n``.

    Uniforms are drawn from ``(eps, 1 - eps)`` with ``eps = 1e-15`` so that
    unbounded tails never produce infinite values.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    lam = as_lambda(lam)
    u = SAMPLE_EPS + (1.0 - 2.0 * SAMPLE_EPS) * rng.random(n)
    return quantile(u, lam)


def expected_payoff(lam, strike):
    """``E[max(Y - K, 0)]`` for ``Y ~ GLD(lam)`` and strike ``K``."""
    yf, lf, shape = _flat_pair(strike, lam)
    l1, l2, l3, l4 = _split(lf)
    if np.any(l4 <= -1.0):
        raise NonexistentMomentError("the upper tail has no finite mean for lambda4 <= -1")
    lower, upper = support_bounds(lf)
    out = np.zeros_like(yf)

    below = yf <= lower
    if np.any(below):
        # a finite lower bound implies lambda3 > 0, so the mean exists
        mean = l1 + (1.0 / (l4 + 1.0) - 1.0 / (l3 + 1.0)) / l2
        out[below] = mean[below] - yf[below]

    mid = ~below & (yf < upper)
    if np.any(mid):
        t, status = _backend.invert_logit(yf[mid], lf[mid])
        if np.any(status == _backend.STATUS_FAILED):
            raise ConvergenceError("strike inversion did not converge")
        a, b, k = l3[mid], l4[mid], yf[mid]
        ls, l1s = _logs(t)
        s = np.exp(ls)
        tail = np.exp(l1s)
        lower_part = -(s * _boxcox(a, ls) + tail) / (a + 1.0)
        upper_part = -tail * (_boxcox(b, l1s) - 1.0) / (b + 1.0)
        out[mid] = (l1[mid] - k) * tail + (lower_part + upper_part) / l2[mid]
    return _unwrap(np.maximum(out, 0.0), shape)


def quantile_partials(u, lam):
    """Partial derivatives ``(dQ/du, dQ/dl1, dQ/dl2, dQ/dl3, dQ/dl4)``.

    Returned along a new last axis of length 5.  The shape derivatives are
    continuous through ``l3 = 0`` and ``l4 = 0``.
    """
    lam = as_lambda(lam)
    u = np.asarray(u, dtype=np.float64)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("u must lie in the open interval (0, 1)")
    l1, l2, l3, l4 = _split(lam)
    lu = np.log(u)
    l1u = np.log1p(-u)
    g3 = _boxcox(l3, lu)
    g4 = _boxcox(l4, l1u)
    shape = np.broadcast_shapes(u.shape, l1.shape)
    out = np.empty(shape + (5,))
    out[..., 0] = (np.exp((l3 - 1.0) * lu) + np.exp((l4 - 1.0) * l1u)) / l2
    out[..., 1] = 1.0
    out[..., 2] = -(g3 - g4) / (l2 * l2)
    out[..., 3] = _boxcox_dlam(l3, lu) / l2
    out[..., 4] = -_boxcox_dlam(l4, l1u) / l2
    return out
