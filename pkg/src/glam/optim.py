"""Local optimizers used to maximize the conditional likelihood.

``trust_region_minimize`` wraps scipy's trust-region solver (quasi-Newton
Hessian, projected-CG subproblem).  ``cmaes_constrained_minimize`` is a
(1+1)-CMA-ES with the active constraint handling of Arnold and Hansen (2012):
infeasible offspring are rejected and the Cholesky factor is shrunk along
the directions that violated a constraint.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError, FeasibilityError

__all__ = ["OptimResult", "trust_region_minimize", "cmaes_constrained_minimize"]


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    success: bool
    message: str
    active: bool = False
    history: list = field(default_factory=list)


def trust_region_minimize(fun, x0, maxiter=500, gtol=1e-6, hess=None, active_check=None):
    """Minimize ``fun`` (returning ``(value, gradient)``) from ``x0``.

    Stops when the infinity norm of the gradient falls below ``gtol`` or after
    ``maxiter`` iterations.  ``hess`` may supply an exact Hessian; otherwise a
    BFGS approximation is maintained.  ``active_check(x)``, if given, decides
    the ``active`` flag of the result.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    f0, g0 = fun(x0)
    if not np.isfinite(f0) or not np.all(np.isfinite(g0)):
        raise DomainError("objective or gradient is not finite at the starting point")

    best = {"x": x0.copy(), "f": f0}

    def wrapped(x):
        f, g = fun(x)
        if not np.isfinite(f):
            # steer the trust region away from non-finite regions
            return 1e300, np.zeros_like(x)
        if f < best["f"]:
            best["x"] = x.copy()
            best["f"] = f
        return f, g

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = optimize.minimize(
            wrapped, x0, jac=True, method="trust-constr",
            hess=hess if hess is not None else optimize.BFGS(),
            options={"gtol": gtol, "xtol": 1e-12, "maxiter": maxiter},
        )
    x = np.asarray(res.x, dtype=np.float64)
    fx = float(res.fun)
    if best["f"] < fx:
        x, fx = best["x"], best["f"]
    out = OptimResult(x, fx, int(res.nit), int(res.nfev), res.status in (1, 2), str(res.message))
    if active_check is not None:
        out.active = bool(active_check(x))
    return out


def cmaes_constrained_minimize(fun, constraints, x0, sigma0=1.0, scales=None, max_evals=None,
                               rng=None, xtol=1e-11, max_trials=None):
    """(1+1)-CMA-ES for ``min fun(x)`` subject to ``constraints(x) <= 0``.

    ``constraints`` returns an array of constraint values; entries > 0 are
    violated.  ``scales`` sets the initial Cholesky factor ``diag(scales)``.
    The best-so-far objective value never increases; its sequence is kept in
    ``history``.
    """
    x = np.array(x0, dtype=np.float64)
    n = x.size
    rng = np.random.default_rng(rng)
    if max_evals is None:
        max_evals = 10_000 * n
    if max_trials is None:
        max_trials = 20 * max_evals

    g = np.asarray(constraints(x), dtype=np.float64)
    if np.any(g > 0):
        raise FeasibilityError("the starting point violates constraints")
    fx = float(fun(x))
    if not np.isfinite(fx):
        raise FeasibilityError("the objective is not finite at the starting point")

    d = 1.0 + n / 2.0
    c = 2.0 / (n + 2.0)
    c_p = 1.0 / 12.0
    p_target = 2.0 / 11.0
    c_cov_plus = 2.0 / (n * n + 6.0)
    c_c = 1.0 / (n + 2.0)
    c_cov_minus = 0.4 / (n ** 1.6 + 1.0)
    beta = 0.1 / (n + 2.0)

    sigma = float(sigma0)
    a = np.diag(np.ones(n) if scales is None else np.asarray(scales, dtype=np.float64))
    s = np.zeros(n)
    p_succ = p_target
    v = np.zeros((g.size, n))
    ancestors = [fx]
    history = [fx]
    evals = 1
    trials = 0
    message = "evaluation budget exhausted"

    while evals < max_evals and trials < max_trials:
        trials += 1
        z = rng.standard_normal(n)
        az = a @ z
        y = x + sigma * az
        gy = np.asarray(constraints(y), dtype=np.float64)
        violated = np.flatnonzero(gy > 0)
        if violated.size:
            v[violated] = (1.0 - c_c) * v[violated] + c_c * az
            w = np.linalg.solve(a, v[violated].T).T
            ww = np.einsum("ij,ij->i", w, w)
            ok = ww > 0
            if ok.any():
                upd = (v[violated][ok] / ww[ok, None]).T @ w[ok]
                a = a - beta / violated.size * upd
            continue

        fy = float(fun(y))
        evals += 1
        if fy <= fx:
            x, fx = y, fy
            p_succ = (1.0 - c_p) * p_succ + c_p
            s = (1.0 - c) * s + math.sqrt(c * (2.0 - c)) * az
            w = np.linalg.solve(a, s)
            nw2 = float(w @ w)
            if nw2 > 0:
                r = math.sqrt(1.0 - c_cov_plus)
                a = r * a + r / nw2 * (math.sqrt(1.0 + c_cov_plus * nw2 / (1.0 - c_cov_plus)) - 1.0) * np.outer(s, w)
            ancestors.append(fy)
            del ancestors[:-5]
        else:
            p_succ = (1.0 - c_p) * p_succ
            if len(ancestors) >= 5 and fy > ancestors[0]:
                nz2 = float(z @ z)
                cm = c_cov_minus
                if 1.0 < cm * (2.0 * nz2 - 1.0):
                    cm = 1.0 / (2.0 * nz2 - 1.0)
                r = math.sqrt(1.0 + cm)
                a = r * a + r / nz2 * (math.sqrt(1.0 - cm * nz2 / (1.0 + cm)) - 1.0) * np.outer(az, z)
        sigma *= math.exp((p_succ - p_target) / (d * (1.0 - p_target)))
        history.append(fx)
        if sigma * np.abs(a).max() < xtol * (1.0 + np.abs(x).max()):
            message = "step size below tolerance"
            break
    else:
        if trials >= max_trials:
            message = "trial budget exhausted"

    return OptimResult(x, fx, trials, evals, message == "step size below tolerance", message,
                       history=history)
