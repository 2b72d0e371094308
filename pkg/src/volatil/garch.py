"""Regression with GARCH(1,1) errors, estimated by random-walk Metropolis-Hastings.

sigma^2_t = alpha0 + alpha1 * ytilde_{t-1}^2 + alpha2 * sigma^2_{t-1}, with
ytilde = y - X beta, ytilde_0 = 0 and sigma^2_0 fixed to the empirical variance
of the starting residuals. Flat priors on alpha in R+; beta has the normal prior
N(b0, B0inv^{-1}) (a vague B0inv makes it effectively flat).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.optimize import minimize_scalar

from . import kernels
from .errors import ValidationError
from .linreg import RegressionData, RegressionPrior
from .model import LOG_2PI
from .rngtools import normals, uniforms


@dataclass(frozen=True)
class GarchParams:
    alpha0: float
    alpha1: float
    alpha2: float

    def __post_init__(self):
        for name in ("alpha0", "alpha1", "alpha2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.alpha0 > 0:
            raise ValidationError(f"alpha0 must be positive, got {self.alpha0}")
        if not (self.alpha1 >= 0 and self.alpha2 >= 0):
            raise ValidationError("alpha1 and alpha2 must be nonnegative")

    @property
    def stationary(self) -> bool:
        return self.alpha1 + self.alpha2 < 1.0

    def as_array(self):
        return np.array([self.alpha0, self.alpha1, self.alpha2])


def garch_recursion(ytilde, params: GarchParams, sigma2_0: float, ytilde0: float = 0.0) -> np.ndarray:
    """Conditional variances sigma^2_1..sigma^2_n."""
    if not sigma2_0 > 0:
        raise ValidationError("sigma2_0 must be positive")
    yt = np.ascontiguousarray(ytilde, dtype=float)
    return kernels.garch_variance(yt, params.alpha0, params.alpha1, params.alpha2,
                                  float(sigma2_0), float(ytilde0))


def garch_loglik(ytilde, alpha, sigma2_0: float, ytilde0: float = 0.0):
    """Gaussian log-likelihood and the variance path for residuals ``ytilde``."""
    s2 = kernels.garch_variance(ytilde, alpha[0], alpha[1], alpha[2], sigma2_0, ytilde0)
    ll = -0.5 * (ytilde.size * LOG_2PI + float(np.log(s2).sum()) + float((ytilde * ytilde / s2).sum()))
    return ll, s2


def _sq_acf1(alpha1, persistence):
    b = persistence - alpha1
    return alpha1 * (1.0 - alpha1 * b - b * b) / (1.0 - 2.0 * alpha1 * b - b * b)


def moment_start(resid) -> GarchParams:
    """Method-of-moments GARCH(1,1) values from residual variance and squared-residual ACF."""
    e = np.asarray(resid, dtype=float)
    v = float(e.var())
    e2 = e * e - (e * e).mean()
    denom = float(e2 @ e2)
    rho1 = float(e2[1:] @ e2[:-1]) / denom if denom > 0 else 0.0
    rho2 = float(e2[2:] @ e2[:-2]) / denom if denom > 0 else 0.0
    if rho1 > 0.02 and rho2 > 0:
        pers = min(max(rho2 / rho1, 0.05), 0.99)
        fit = minimize_scalar(lambda a: (_sq_acf1(a, pers) - rho1) ** 2,
                              bounds=(1e-3, pers - 1e-3), method="bounded")
        a1 = float(fit.x)
    else:
        pers, a1 = 0.5, 0.01
    return GarchParams(max(v * (1.0 - pers), 1e-12), a1, max(pers - a1, 1e-3))


@dataclass(frozen=True)
class GarchDraws:
    beta: np.ndarray
    alpha: np.ndarray
    sigma2_last: np.ndarray
    resid_last: np.ndarray
    sigma2_0: float
    acceptance: dict = field(default_factory=dict)

    def columns(self):
        p = self.beta.shape[1]
        return [f"beta_{j}" for j in range(p)] + ["alpha_0", "alpha_1", "alpha_2"]

    def matrix(self):
        return np.column_stack([self.beta, self.alpha])


def mh_accept(log_ratio: float, u: float) -> bool:
    """Metropolis-Hastings decision: accept iff log(u) < log acceptance ratio."""
    return math.log(u) < log_ratio


class GarchChain:
    """Current state of the RW-MH chain with cached residuals, variances and log-likelihood."""

    def __init__(self, data: RegressionData, prior: RegressionPrior, beta, alpha, sigma2_0):
        self.X, self.y = data.X, data.y
        self.prior = prior
        self.sigma2_0 = float(sigma2_0)
        self.beta = np.asarray(beta, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        self.resid = self.y - self.X @ self.beta
        self.loglik, self.s2 = garch_loglik(self.resid, self.alpha, self.sigma2_0)

    def log_prior_beta(self, beta):
        d = beta - self.prior.b0
        return -0.5 * float(d @ self.prior.B0inv @ d)

    def recompute_loglik(self) -> float:
        ll, _ = garch_loglik(self.y - self.X @ self.beta, self.alpha, self.sigma2_0)
        return ll

    def step_alpha(self, j, scale, rng) -> bool:
        prop = self.alpha.copy()
        step = scale * float(normals(rng))
        u = uniforms(rng)
        log_new = math.log(self.alpha[j]) + step
        if not -700.0 < log_new < 700.0:
            return False
        prop[j] = math.exp(log_new)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ll, s2 = garch_loglik(self.resid, prop, self.sigma2_0)
        if not math.isfinite(ll):
            return False
        # flat prior on alpha_j; log-scale proposal contributes the Jacobian alpha*_j / alpha_j
        if mh_accept(ll - self.loglik + step, u):
            self.alpha, self.loglik, self.s2 = prop, ll, s2
            return True
        return False

    def step_beta(self, chol, rng) -> bool:
        prop = self.beta + chol @ normals(rng, self.beta.size)
        u = uniforms(rng)
        resid = self.y - self.X @ prop
        ll, s2 = garch_loglik(resid, self.alpha, self.sigma2_0)
        log_ratio = ll - self.loglik + self.log_prior_beta(prop) - self.log_prior_beta(self.beta)
        if mh_accept(log_ratio, u):
            self.beta, self.resid, self.loglik, self.s2 = prop, resid, ll, s2
            return True
        return False


def garch_rwmh(data: RegressionData, prior: RegressionPrior, iters: int, burnin: int,
               rw_scales=(0.1, 0.1, 0.1), rng=None, thin: int = 1,
               start_beta=None, start_alpha: GarchParams | None = None,
               beta_scale: float | None = None) -> GarchDraws:
    """Metropolis-within-Gibbs: log-scale RW on each alpha_j, then a joint RW on beta.

    The beta proposal covariance is the weighted least-squares covariance at the
    starting values, scaled by ``beta_scale**2`` (default 2.38^2 / p).
    """
    scales = np.asarray(rw_scales, dtype=float).ravel()
    if scales.size != 3 or np.any(scales <= 0):
        raise ValidationError("rw_scales must be 3 positive numbers")
    if iters < 1 or burnin < 0 or thin < 1:
        raise ValidationError("need iters >= 1, burnin >= 0, thin >= 1")
    if prior.b0.size != data.p:
        raise ValidationError("prior dimension does not match the design")
    if data.rank() < data.p:
        raise ValidationError("design is rank deficient")
    X, y = data.X, data.y
    p = data.p

    if start_beta is None:
        start_beta = np.linalg.lstsq(X, y, rcond=None)[0]
    resid0 = y - X @ start_beta
    sigma2_0 = float(resid0.var())
    if not sigma2_0 > 0:
        raise ValidationError("residual variance is zero; GARCH errors are undefined")
    alpha0 = start_alpha or moment_start(resid0)
    chain = GarchChain(data, prior, start_beta, alpha0.as_array(), sigma2_0)

    w = 1.0 / chain.s2
    cov = np.linalg.inv((X * w[:, None]).T @ X)
    beta_scale = 2.38 / math.sqrt(p) if beta_scale is None else float(beta_scale)
    chol = beta_scale * cholesky(cov, lower=True)

    kept = iters // thin
    beta_out = np.empty((kept, p))
    alpha_out = np.empty((kept, 3))
    s2_out = np.empty(kept)
    res_out = np.empty(kept)
    acc = np.zeros(4)
    for it in range(1, burnin + iters + 1):
        moved = [chain.step_alpha(j, scales[j], rng) for j in range(3)]
        moved.append(chain.step_beta(chol, rng))
        i = it - burnin
        if i > 0:
            acc += moved
            if i % thin == 0:
                k = i // thin - 1
                beta_out[k] = chain.beta
                alpha_out[k] = chain.alpha
                s2_out[k] = chain.s2[-1] if chain.s2.size else sigma2_0
                res_out[k] = chain.resid[-1] if chain.resid.size else 0.0
    rates = acc / iters
    acceptance = {"alpha_0": rates[0], "alpha_1": rates[1], "alpha_2": rates[2], "beta": rates[3]}
    for name, rate in acceptance.items():
        if rate == 0.0:
            warnings.warn(f"no accepted moves for {name} (alpha scales {scales.tolist()}, "
                          f"beta scale {beta_scale})", RuntimeWarning, stacklevel=2)
    return GarchDraws(beta_out, alpha_out, s2_out, res_out, sigma2_0, acceptance)


def wls_beta(data: RegressionData, sigma2) -> np.ndarray:
    """Weighted least squares coefficients with weights 1 / sigma^2_t."""
    w = 1.0 / np.asarray(sigma2, dtype=float)
    Xw = data.X * w[:, None]
    L = cholesky(Xw.T @ data.X, lower=True)
    return cho_solve((L, True), Xw.T @ data.y)
