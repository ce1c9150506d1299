"""Pure numpy implementation of the hot kernels.

Used when the compiled extension is unavailable, and as the reference the
compiled kernels are tested against.  Every function here has a twin with the
same signature in ``_kernels.pyx``.

The quantile function is inverted in logit space, ``t = log(u / (1 - u))``,
so that probabilities down to ``exp(-TMAX)`` are resolved without underflow.
"""

import math

import numpy as np

TMAX = 700.0

STATUS_INSIDE = 0
STATUS_BELOW = -1
STATUS_ABOVE = 1
STATUS_FAILED = 2


def _boxcox(lam, logx):
    # (x**lam - 1) / lam, continuous at lam == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.expm1(lam * logx) / lam
    return np.where(lam == 0.0, logx, out)


def _boxcox_dlam(lam, logx):
    # d/dlam of (x**lam - 1) / lam
    t = lam * logx
    small = np.abs(t) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        h = (t * np.exp(t) - np.expm1(t)) / (t * t)
    ts = np.where(small, t, 0.0)
    hs = 0.5 + ts * (1.0 / 3.0 + ts * (1.0 / 8.0 + ts / 30.0))
    h = np.where(small, hs, h)
    return logx * logx * h


def _logs(t):
    return -np.logaddexp(0.0, -t), -np.logaddexp(0.0, t)


def _q_of_t(t, l1, l2, l3, l4):
    lu, l1u = _logs(t)
    return l1 + (_boxcox(l3, lu) - _boxcox(l4, l1u)) / l2


def invert_logit(y, lam, max_iter=200):
    """Solve ``Q(u; lam_i) = y_i`` for every row, returning ``(t, status)``.

    ``t`` is the logit of the solution, clipped to ``[-TMAX, TMAX]``.
    ``status`` is 0 for an interior solution, -1 / +1 when ``y`` lies below
    ``Q(expit(-TMAX))`` / above ``Q(expit(TMAX))``, and 2 when the iteration
    budget ran out.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    l1, l2, l3, l4 = lam[:, 0], lam[:, 1], lam[:, 2], lam[:, 3]
    n = y.shape[0]

    status = np.zeros(n, dtype=np.int8)
    t = np.empty(n)
    q_lo = _q_of_t(np.full(n, -TMAX), l1, l2, l3, l4)
    q_hi = _q_of_t(np.full(n, TMAX), l1, l2, l3, l4)
    below = ~(y > q_lo)
    above = ~(y < q_hi) & ~below
    status[below] = STATUS_BELOW
    status[above] = STATUS_ABOVE
    t[below] = -TMAX
    t[above] = TMAX

    idx = np.flatnonzero(status == STATUS_INSIDE)
    yy = y[idx]
    a1, a2, a3, a4 = l1[idx], l2[idx], l3[idx], l4[idx]
    lo = np.full(idx.size, -TMAX)
    hi = np.full(idx.size, TMAX)
    tt = np.clip(a2 * (yy - a1), -TMAX + 1.0, TMAX - 1.0)
    step_old = np.full(idx.size, 2.0 * TMAX)
    active = np.ones(idx.size, dtype=bool)

    for _ in range(max_iter):
        if not active.any():
            break
        k = np.flatnonzero(active)
        tk = tt[k]
        lu, l1u = _logs(tk)
        b1, b2, b3, b4 = a1[k], a2[k], a3[k], a4[k]
        f = b1 + (_boxcox(b3, lu) - _boxcox(b4, l1u)) / b2 - yy[k]
        with np.errstate(over="ignore"):
            dq = (np.exp(b3 * lu + l1u) + np.exp(lu + b4 * l1u)) / b2
        lo_k = np.where(f < 0.0, tk, lo[k])
        hi_k = np.where(f > 0.0, tk, hi[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = tk - f / dq
        # bisect when Newton leaves the bracket or fails to halve the last step
        bad = ~np.isfinite(tn) | (tn <= lo_k) | (tn >= hi_k) | (np.abs(tn - tk) > 0.5 * step_old[k])
        tn = np.where(bad, 0.5 * (lo_k + hi_k), tn)
        step_old[k] = np.abs(tn - tk)
        tol = 1e-13 * (1.0 + np.abs(tk))
        done = (f == 0.0) | (np.abs(tn - tk) <= tol) | (hi_k - lo_k <= tol)
        tt[k] = np.where(f == 0.0, tk, tn)
        lo[k] = lo_k
        hi[k] = hi_k
        active[k[done]] = False

    t[idx] = tt
    status[idx[active]] = STATUS_FAILED
    return t, status


def loglik_terms(y, lam, kappa, max_iter=200):
    """Per-point log-density and its gradient with respect to ``lam``.

    Points beyond the resolvable quantile range get the boundary log-density
    minus ``kappa * lam2 * distance``, which keeps the objective finite and
    continuous.  Returns ``(logf, grad, status)`` with ``grad`` of shape
    ``(n, 4)``; ``status`` follows :func:`invert_logit`.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    t, status = invert_logit(y, lam, max_iter)
    l1, l2, l3, l4 = lam[:, 0], lam[:, 1], lam[:, 2], lam[:, 3]
    lu, l1u = _logs(t)

    log_d = np.logaddexp((l3 - 1.0) * lu, (l4 - 1.0) * l1u)
    logf = np.log(l2) - log_d
    r1 = np.exp((l3 - 1.0) * lu - log_d)
    r2 = np.exp((l4 - 1.0) * l1u - log_d)

    g3 = _boxcox(l3, lu)
    g4 = _boxcox(l4, l1u)
    dq = np.empty_like(lam)
    dq[:, 0] = 1.0
    dq[:, 1] = -(g3 - g4) / (l2 * l2)
    dq[:, 2] = _boxcox_dlam(l3, lu) / l2
    dq[:, 3] = -_boxcox_dlam(l4, l1u) / l2

    grad = np.zeros_like(lam)
    grad[:, 1] = 1.0 / l2
    grad[:, 2] = -r1 * lu
    grad[:, 3] = -r2 * l1u

    inside = status == STATUS_INSIDE
    with np.errstate(over="ignore", invalid="ignore"):
        c = l2 * ((l3 - 1.0) * np.exp((l3 - 2.0) * lu - 2.0 * log_d)
                  - (l4 - 1.0) * np.exp((l4 - 2.0) * l1u - 2.0 * log_d))
    grad[inside] += c[inside, None] * dq[inside]

    q_edge = l1 + (g3 - g4) / l2
    for flag, sign in ((STATUS_BELOW, 1.0), (STATUS_ABOVE, -1.0)):
        m = status == flag
        if m.any():
            dist = sign * (q_edge[m] - y[m])
            logf[m] -= kappa * l2[m] * dist
            grad[m] -= kappa * sign * l2[m, None] * dq[m]
            grad[m, 1] -= kappa * dist

    failed = status == STATUS_FAILED
    logf[failed] = np.nan
    grad[failed] = np.nan
    return logf, grad, status


def sir_batch(s0, i0, population, beta, gamma, uniforms):
    """Gillespie runs of the SIR chain until extinction of the infected.

    Row ``k`` of ``uniforms`` feeds run ``k``; two numbers are consumed per
    event (waiting time, event choice).  Returns ``(s_final - s0, t_end)``.
    """
    n = len(s0)
    delta = np.zeros(n, dtype=np.int64)
    t_end = np.zeros(n)
    for k in range(n):
        s = int(s0[k])
        i = int(i0[k])
        row = uniforms[k].tolist()
        t = 0.0
        j = 0
        while i > 0:
            rate_inf = beta * s * i / population
            total = rate_inf + gamma * i
            t -= math.log1p(-row[j]) / total
            if row[j + 1] * total < rate_inf:
                s -= 1
                i += 1
            else:
                i -= 1
            j += 2
        delta[k] = s - int(s0[k])
        t_end[k] = t
    return delta, t_end
