# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, log, log1p, fabs, isfinite

cnp.import_array()

cdef double TMAX = 700.0


cdef inline double _logaddexp(double a, double b) nogil:
    if a > b:
        return a + log1p(exp(b - a))
    elif b > a:
        return b + log1p(exp(a - b))
    return a + 0.6931471805599453


cdef inline double _log_expit(double t) nogil:
    # log(u) for u = 1 / (1 + exp(-t))
    if t > 0.0:
        return -log1p(exp(-t))
    return t - log1p(exp(t))


cdef inline double _boxcox(double lam, double logx) nogil:
    if lam == 0.0:
        return logx
    return expm1(lam * logx) / lam


cdef inline double _boxcox_dlam(double lam, double logx) nogil:
    cdef double t = lam * logx
    cdef double h
    if fabs(t) < 1e-3:
        h = 0.5 + t * (1.0 / 3.0 + t * (1.0 / 8.0 + t / 30.0))
    else:
        h = (t * exp(t) - expm1(t)) / (t * t)
    return logx * logx * h


cdef inline double _q(double t, double l1, double l2, double l3, double l4) nogil:
    return l1 + (_boxcox(l3, _log_expit(t)) - _boxcox(l4, _log_expit(-t))) / l2


cdef int _solve(double y, double l1, double l2, double l3, double l4,
                int max_iter, double *t_out) nogil:
    cdef double lo = -TMAX, hi = TMAX, step_old = 2.0 * TMAX
    cdef double t, tn, f, dq, lu, l1u, tol
    cdef int it
    if not (y > _q(-TMAX, l1, l2, l3, l4)):
        t_out[0] = -TMAX
        return -1
    if not (y < _q(TMAX, l1, l2, l3, l4)):
        t_out[0] = TMAX
        return 1
    t = l2 * (y - l1)
    if t < -TMAX + 1.0:
        t = -TMAX + 1.0
    elif t > TMAX - 1.0:
        t = TMAX - 1.0
    for it in range(max_iter):
        lu = _log_expit(t)
        l1u = _log_expit(-t)
        f = l1 + (_boxcox(l3, lu) - _boxcox(l4, l1u)) / l2 - y
        if f == 0.0:
            t_out[0] = t
            return 0
        if f < 0.0:
            lo = t
        else:
            hi = t
        dq = (exp(l3 * lu + l1u) + exp(lu + l4 * l1u)) / l2
        tn = t - f / dq
        # bisect when Newton leaves the bracket or fails to halve the last step
        if not isfinite(tn) or tn <= lo or tn >= hi or fabs(tn - t) > 0.5 * step_old:
            tn = 0.5 * (lo + hi)
        step_old = fabs(tn - t)
        tol = 1e-13 * (1.0 + fabs(t))
        if fabs(tn - t) <= tol or hi - lo <= tol:
            t_out[0] = tn
            return 0
        t = tn
    t_out[0] = t
    return 2


def invert_logit(y, lam, int max_iter=200):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = np.empty(n)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] status = np.empty(n, dtype=np.int8)
    cdef double tt
    with nogil:
        for i in range(n):
            status[i] = _solve(yv[i], lv[i, 0], lv[i, 1], lv[i, 2], lv[i, 3], max_iter, &tt)
            t[i] = tt
    return t, status


def loglik_terms(y, lam, double kappa, int max_iter=200):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] logf = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.empty((n, 4))
    cdef cnp.ndarray[cnp.int8_t, ndim=1] status = np.empty(n, dtype=np.int8)
    cdef double t, l1, l2, l3, l4, lu, l1u, log_d, r1, r2, g3, g4, c, dist, sign
    cdef double dq0, dq1, dq2, dq3, nan = float("nan")
    cdef int st
    with nogil:
        for i in range(n):
            l1 = lv[i, 0]
            l2 = lv[i, 1]
            l3 = lv[i, 2]
            l4 = lv[i, 3]
            st = _solve(yv[i], l1, l2, l3, l4, max_iter, &t)
            status[i] = st
            if st == 2:
                logf[i] = nan
                grad[i, 0] = nan
                grad[i, 1] = nan
                grad[i, 2] = nan
                grad[i, 3] = nan
                continue
            lu = _log_expit(t)
            l1u = _log_expit(-t)
            log_d = _logaddexp((l3 - 1.0) * lu, (l4 - 1.0) * l1u)
            r1 = exp((l3 - 1.0) * lu - log_d)
            r2 = exp((l4 - 1.0) * l1u - log_d)
            g3 = _boxcox(l3, lu)
            g4 = _boxcox(l4, l1u)
            dq0 = 1.0
            dq1 = -(g3 - g4) / (l2 * l2)
            dq2 = _boxcox_dlam(l3, lu) / l2
            dq3 = -_boxcox_dlam(l4, l1u) / l2
            logf[i] = log(l2) - log_d
            grad[i, 0] = 0.0
            grad[i, 1] = 1.0 / l2
            grad[i, 2] = -r1 * lu
            grad[i, 3] = -r2 * l1u
            if st == 0:
                c = l2 * ((l3 - 1.0) * exp((l3 - 2.0) * lu - 2.0 * log_d)
                          - (l4 - 1.0) * exp((l4 - 2.0) * l1u - 2.0 * log_d))
                grad[i, 0] += c * dq0
                grad[i, 1] += c * dq1
                grad[i, 2] += c * dq2
                grad[i, 3] += c * dq3
            else:
                sign = 1.0 if st == -1 else -1.0
                dist = sign * (l1 + (g3 - g4) / l2 - yv[i])
                logf[i] -= kappa * l2 * dist
                grad[i, 0] -= kappa * sign * l2 * dq0
                grad[i, 1] -= kappa * sign * l2 * dq1 + kappa * dist
                grad[i, 2] -= kappa * sign * l2 * dq2
                grad[i, 3] -= kappa * sign * l2 * dq3
    return logf, grad, status


def sir_batch(s0, i0, double population, double beta, double gamma, uniforms):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sv = np.ascontiguousarray(s0, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iv = np.ascontiguousarray(i0, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] uv = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = sv.shape[0], k, j
    cdef cnp.ndarray[cnp.int64_t, ndim=1] delta = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t_end = np.zeros(n)
    cdef long s, inf
    cdef double t, rate_inf, total
    with nogil:
        for k in range(n):
            s = sv[k]
            inf = iv[k]
            t = 0.0
            j = 0
            while inf > 0:
                rate_inf = beta * s * inf / population
                total = rate_inf + gamma * inf
                t -= log1p(-uv[k, j]) / total
                if uv[k, j + 1] * total < rate_inf:
                    s -= 1
                    inf += 1
                else:
                    inf -= 1
                j += 2
            delta[k] = s - sv[k]
            t_end[k] = t
    return delta, t_end
