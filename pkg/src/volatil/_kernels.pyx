# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``volatil._fallback`` exactly."""

import numpy as np

from libc.math cimport exp, sqrt, isfinite

from volatil.errors import SamplerError


def sample_indicators(const double[::1] resid, const double[::1] log_coef,
                      const double[::1] means, const double[::1] inv_var,
                      const double[::1] u):
    cdef Py_ssize_t n = resid.shape[0], K = means.shape[0]
    cdef Py_ssize_t t, j, pick
    cdef double d, lp, mx, total, target, cum
    cdef double[::1] p = np.empty(K)
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    for t in range(n):
        d = resid[t]
        mx = -1e308
        for j in range(K):
            lp = log_coef[j] - 0.5 * (d - means[j]) * (d - means[j]) * inv_var[j]
            p[j] = lp
            if lp > mx:
                mx = lp
        total = 0.0
        for j in range(K):
            p[j] = exp(p[j] - mx)
            total += p[j]
        target = u[t] * total
        cum = 0.0
        pick = K - 1
        for j in range(K):
            cum += p[j]
            if cum > target:
                pick = j
                break
        out[t] = pick
    return out_arr


def tridiag_sample(const double[::1] diag, const double[::1] off,
                   const double[::1] covector, const double[::1] z):
    cdef Py_ssize_t n = diag.shape[0], i
    cdef double piv
    ld_arr = np.empty(n)
    ls_arr = np.empty(max(n - 1, 0))
    x_arr = np.empty(n)
    cdef double[::1] ld = ld_arr, ls = ls_arr, x = x_arr
    piv = diag[0]
    if not (piv > 0.0 and isfinite(piv)):
        raise SamplerError(f"precision matrix not positive definite at pivot 0 (value {piv!r})")
    ld[0] = sqrt(piv)
    for i in range(1, n):
        ls[i - 1] = off[i - 1] / ld[i - 1]
        piv = diag[i] - ls[i - 1] * ls[i - 1]
        if not (piv > 0.0 and isfinite(piv)):
            raise SamplerError(
                f"precision matrix not positive definite at pivot {i} (value {piv!r})")
        ld[i] = sqrt(piv)
    x[0] = covector[0] / ld[0]
    for i in range(1, n):
        x[i] = (covector[i] - ls[i - 1] * x[i - 1]) / ld[i]
    for i in range(n):
        x[i] += z[i]
    x[n - 1] = x[n - 1] / ld[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (x[i] - ls[i] * x[i + 1]) / ld[i]
    return x_arr


def garch_variance(const double[::1] ytilde, double a0, double a1, double a2,
                   double sigma2_0, double ytilde0):
    cdef Py_ssize_t n = ytilde.shape[0], t
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    if n == 0:
        return out_arr
    out[0] = a0 + a1 * ytilde0 * ytilde0 + a2 * sigma2_0
    for t in range(1, n):
        out[t] = a0 + a1 * ytilde[t - 1] * ytilde[t - 1] + a2 * out[t - 1]
    return out_arr
