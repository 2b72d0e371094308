"""MCMC output diagnostics."""

import math

import numpy as np


def ess_batch_means(x):
    """Effective sample size by batch means with ceil(sqrt(M)) batches.

    ``x`` is a 1-D chain or an (M, k) array of k chains; the result is clipped
    to (0, M]. Constant chains report M.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    m = x.shape[0]
    if m < 2:
        out = np.full(x.shape[1], float(m))
        return float(out[0]) if squeeze else out
    a = math.ceil(math.sqrt(m))
    b = max(m // a, 1)
    a = m // b
    tail = x[m - a * b:]
    bm = tail.reshape(a, b, -1).mean(axis=1)
    var = x.var(axis=0, ddof=1)
    asym = b * bm.var(axis=0, ddof=1) if a > 1 else var
    with np.errstate(divide="ignore", invalid="ignore"):
        ess = np.where((var > 0) & (asym > 0), m * var / asym, float(m))
    ess = np.clip(ess, np.finfo(float).tiny, m)
    return float(ess[0]) if squeeze else ess


def mc_standard_error(x):
    """Monte Carlo standard error of the chain mean(s), sd / sqrt(ESS)."""
    x = np.asarray(x, dtype=float)
    return np.std(x, axis=0, ddof=1) / np.sqrt(ess_batch_means(x))
