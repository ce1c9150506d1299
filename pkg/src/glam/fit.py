"""Fitting generalized lambda models.

The pipeline: feasible generalized least squares gives a mean and a
log-variance expansion; these seed ``lambda1`` and ``log lambda2`` with the
shape parameters held at a normal-like constant.  The likelihood is then
maximized twice, first with constant shapes and then with shapes linear in
the inputs.  Each round starts with a trust-region solver and switches to a
constrained (1+1)-CMA-ES when observations end up on a support boundary.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DomainError, FeasibilityError
from .model import DEFAULT_SHAPE_FLOOR, KAPPA, GlamModel, LikelihoodProblem, post_threshold
from .optim import cmaes_constrained_minimize, trust_region_minimize
from .pce import TruncationSet, design_matrix, enumerate_truncation
from .regression import BasisCache, adaptive_ols, ols, wls

__all__ = ["FitConfig", "fgls", "modified_fgls", "fit", "post_threshold"]

Q_NORMS = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
RESIDUAL_FLOOR = 1e-12
LOG_VARIANCE_CLIP = 700.0


@dataclass
class FitConfig:
    """Settings of :func:`fit`.

    ``mean_truncation`` and ``var_truncation``, when both given, replace the
    adaptive basis selection by plain FGLS on those bases.  ``shape_degree``
    of 0 skips the second likelihood round.
    """

    mean_degrees: tuple = tuple(range(11))
    var_degrees: tuple = tuple(range(6))
    q_norms: tuple = Q_NORMS
    n_fgls: int = 10
    shape_start: float = 0.13
    shape_degree: int = 1
    shape_floor: float | None = DEFAULT_SHAPE_FLOOR
    tr_maxiter: int = 500
    tr_gtol: float = 1e-6
    cmaes_max_evals: int | None = None
    active_tol: float = 1e-8
    kappa: float = KAPPA
    gradient: str = "analytic"
    mean_truncation: TruncationSet | None = None
    var_truncation: TruncationSet | None = None
    seed: int = 0

    def __post_init__(self):
        if self.gradient not in ("analytic", "finite-difference"):
            raise DomainError(f"unknown gradient mode {self.gradient!r}")
        if self.n_fgls < 0 or self.shape_degree < 0:
            raise DomainError("iteration counts and degrees must be non-negative")
        if (self.mean_truncation is None) != (self.var_truncation is None):
            raise DomainError("give both fixed truncations or neither")


def _log_sq_residuals(y, fitted):
    # |y - mu| is floored relative to the output scale so the log stays finite
    scale = np.std(y)
    if not scale > 0:
        scale = max(float(np.max(np.abs(y))), 1.0)
    r = np.maximum(np.abs(y - fitted), RESIDUAL_FLOOR * scale)
    return 2.0 * np.log(r)


def _variances(psi_v, c_v):
    return np.exp(np.clip(psi_v @ c_v, -LOG_VARIANCE_CLIP, LOG_VARIANCE_CLIP))


def fgls(marginals, X, y, trunc_mean, trunc_var, n_iter=10):
    """Feasible generalized least squares on fixed bases.

    Alternates an OLS fit of the log squared residuals with a weighted
    refit of the mean.  Returns ``(c_mu, c_v)``; ``c_v`` is ``None`` when
    ``n_iter`` is 0.
    """
    y = np.asarray(y, dtype=np.float64)
    cache = BasisCache(marginals, X, max(trunc_mean.max_degree, trunc_var.max_degree))
    psi_m = cache.design(trunc_mean)
    psi_v = cache.design(trunc_var)
    c_mu = ols(marginals, trunc_mean, X, y, psi=psi_m).coefficients
    c_v = None
    for _ in range(n_iter):
        r = _log_sq_residuals(y, psi_m @ c_mu)
        c_v = ols(marginals, trunc_var, X, r, psi=psi_v).coefficients
        c_mu = wls(marginals, trunc_mean, X, y, _variances(psi_v, c_v), psi=psi_m).coefficients
    return c_mu, c_v


def modified_fgls(marginals, X, y, p1, q1, p2, q2, n_iter=10):
    """FGLS with adaptive basis selection.

    The mean basis is chosen once by adaptive OLS; each iteration reselects
    the log-variance basis.  The iteration whose variance fit has the lowest
    leave-one-out error is returned as
    ``(trunc_mean, c_mu, trunc_var, c_v, info)``, where ``c_mu`` is the
    weighted mean fit of that same iteration.
    """
    y = np.asarray(y, dtype=np.float64)
    max_deg = max(max(p1), max(p2))
    cache = BasisCache(marginals, X, max_deg)
    fit_mu, pq_mu = adaptive_ols(marginals, X, y, p1, q1, cache=cache)
    trunc_mean = fit_mu.truncation
    psi_m = cache.design(trunc_mean)
    c_mu = fit_mu.coefficients
    info = {"mean_pq": pq_mu, "mean_loo": fit_mu.loo_error, "var_loo": []}
    if n_iter == 0:
        return trunc_mean, c_mu, None, None, info

    best = None
    for i in range(n_iter):
        r = _log_sq_residuals(y, psi_m @ c_mu)
        fit_v, pq_v = adaptive_ols(marginals, X, r, p2, q2, cache=cache)
        psi_v = cache.design(fit_v.truncation)
        c_mu = wls(marginals, trunc_mean, X, y, _variances(psi_v, fit_v.coefficients), psi=psi_m).coefficients
        info["var_loo"].append(fit_v.loo_error)
        if best is None or fit_v.loo_error < best[0]:
            best = (fit_v.loo_error, i, c_mu, fit_v, pq_v)
    _, i_best, c_mu, fit_v, pq_v = best
    info["best_iteration"] = i_best
    info["var_pq"] = pq_v
    return trunc_mean, c_mu, fit_v.truncation, fit_v.coefficients, info


def _optimize_round(problem, c0, config, rng, label):
    W = problem.total_weight
    grad_fn = problem.fd_value_and_grad if config.gradient == "finite-difference" else problem.value_and_grad

    def objective(c):
        v, g = grad_fn(c)
        return v / W, g / W

    info = {"round": label, "start": problem.value(c0)}
    tr = trust_region_minimize(objective, c0, maxiter=config.tr_maxiter, gtol=config.tr_gtol,
                               active_check=lambda c: problem.is_active(c, config.active_tol))
    x = tr.x
    info.update(optimizer="trust-region", tr_iterations=tr.nit, tr_converged=tr.success,
                tr_message=tr.message, active=tr.active)
    warns = []
    if not tr.success:
        warns.append(f"{label}: trust region stopped without convergence ({tr.message})")
    if tr.active:
        def feasible(c):
            return bool(np.all(problem.support_margins(c) > 0))

        start = x if feasible(x) else (c0 if feasible(c0) else None)
        if start is None:
            warns.append(f"{label}: no feasible start for the constrained search; kept trust-region result")
        else:
            scales = 0.1 * np.maximum(np.abs(start), 0.01)
            try:
                cm = cmaes_constrained_minimize(
                    lambda c: problem.value(c) / W,
                    lambda c: 1e-12 - problem.support_margins(c),
                    start, scales=scales, max_evals=config.cmaes_max_evals, rng=rng,
                )
            except FeasibilityError as exc:
                warns.append(f"{label}: {exc}; kept trust-region result")
            else:
                x = cm.x
                info.update(optimizer="cmaes", cmaes_evaluations=cm.nfev, cmaes_message=cm.message)
                if not cm.success:
                    warns.append(f"{label}: constrained search stopped on budget ({cm.message})")
    info["final"] = problem.value(x)
    return x, info, warns


def _embed(coef, small, large):
    # place coefficients of a sub-basis into a larger basis, zeros elsewhere
    pos = {a: k for k, a in enumerate(large.as_tuples())}
    out = np.zeros(len(large))
    for a, v in zip(small.as_tuples(), coef):
        out[pos[a]] = v
    return out


def fit(data, marginals, config=None):
    """Fit a generalized lambda model to ``data``.

    Returns a :class:`GlamModel` with the shape floor of ``config`` applied
    at prediction time.  Warnings from the optimizers are stored in
    ``model.metadata["warnings"]`` and also emitted as ``RuntimeWarning``.
    """
    config = FitConfig() if config is None else config
    X, y, w = data.flat()
    if np.ptp(y) == 0:
        raise DegenerateDataError("all outputs are identical; no distribution can be fitted")
    rng = np.random.default_rng(config.seed)
    dim = marginals.dim

    if config.mean_truncation is not None:
        trunc_mean, trunc_var = config.mean_truncation, config.var_truncation
        c_mu, c_v = fgls(marginals, X, y, trunc_mean, trunc_var, config.n_fgls)
        fgls_info = {}
    else:
        trunc_mean, c_mu, trunc_var, c_v, fgls_info = modified_fgls(
            marginals, X, y, config.mean_degrees, config.q_norms,
            config.var_degrees, config.q_norms, config.n_fgls)
    if c_v is None:
        trunc_var = TruncationSet.constant(dim)
        resid = y - design_matrix(marginals, trunc_mean, X) @ c_mu
        c_v = np.array([np.log(max(float(np.mean(resid ** 2)), 1e-300))])

    const = TruncationSet.constant(dim)
    truncs = (trunc_mean, trunc_var, const, const)
    shape_trunc = enumerate_truncation(config.shape_degree, 1.0, dim)
    max_deg = max(t.max_degree for t in truncs + (shape_trunc,))
    cache = BasisCache(marginals, X, max_deg)

    c0 = np.concatenate([c_mu, -0.5 * c_v, [config.shape_start], [config.shape_start]])
    prob1 = LikelihoodProblem(marginals, truncs, X, y, w, kappa=config.kappa, cache=cache)
    c1, info1, warns = _optimize_round(prob1, c0, config, rng, "round 1")
    rounds = [info1]
    final_truncs, c_final = truncs, c1

    if config.shape_degree > 0:
        truncs2 = (trunc_mean, trunc_var, shape_trunc, shape_trunc)
        b1, b2, b3, b4 = prob1.split(c1)
        c2_start = np.concatenate([b1, b2, _embed(b3, const, shape_trunc), _embed(b4, const, shape_trunc)])
        prob2 = LikelihoodProblem(marginals, truncs2, X, y, w, kappa=config.kappa, cache=cache)
        c2, info2, warns2 = _optimize_round(prob2, c2_start, config, rng, "round 2")
        rounds.append(info2)
        warns += warns2
        final_truncs, c_final = truncs2, c2

    for msg in warns:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    metadata = {
        "nll_start": info1["start"],
        "nll_round1": info1["final"],
        "nll_final": rounds[-1]["final"],
        "rounds": rounds,
        "fgls": fgls_info,
        "warnings": warns,
        "n_observations": int(y.shape[0]),
    }
    model = GlamModel.from_coefficients(marginals, final_truncs, c_final, metadata=metadata)
    if config.shape_floor is not None:
        model = post_threshold(model, config.shape_floor)
    return model
