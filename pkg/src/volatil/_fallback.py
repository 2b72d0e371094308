"""Pure numpy/scipy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.linalg import lapack
from scipy.signal import lfilter

from .errors import SamplerError


def sample_indicators(resid, log_coef, means, inv_var, u):
    lp = log_coef - 0.5 * (resid[:, None] - means) ** 2 * inv_var
    p = np.exp(lp - lp.max(axis=1, keepdims=True))
    cum = np.cumsum(p, axis=1)
    target = u * cum[:, -1]
    pick = (cum <= target[:, None]).sum(axis=1)
    return np.minimum(pick, len(means) - 1).astype(np.int64)


def tridiag_sample(diag, off, covector, z):
    n = diag.shape[0]
    ab = np.zeros((2, n))
    ab[0] = diag
    ab[1, : n - 1] = off
    bad = ~np.isfinite(ab[0])
    if bad.any():
        i = int(np.argmax(bad))
        raise SamplerError(f"precision matrix not positive definite at pivot {i} (value {diag[i]!r})")
    fac, info = lapack.dpbtrf(ab, lower=1)
    if info != 0:
        i = info - 1
        raise SamplerError(f"precision matrix not positive definite at pivot {i}")
    a, _ = lapack.dtbtrs(fac, covector[:, None], uplo="L", trans="N")
    a[:, 0] += z
    x, _ = lapack.dtbtrs(fac, a, uplo="L", trans="T")
    return x[:, 0]


def garch_variance(ytilde, a0, a1, a2, sigma2_0, ytilde0):
    n = ytilde.shape[0]
    if n == 0:
        return np.empty(0)
    drive = np.empty(n)
    drive[0] = a0 + a1 * ytilde0 * ytilde0
    drive[1:] = a0 + a1 * ytilde[:-1] ** 2
    out, _ = lfilter([1.0], [1.0, -a2], drive, zi=[a2 * sigma2_0])
    return out
