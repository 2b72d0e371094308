"""Bayesian normal linear regression with homoskedastic or SV errors.

Homoskedastic model: y ~ N(X beta, sigma^2 I), beta | sigma^2 ~ N(b0, sigma^2 B0),
sigma^2 ~ InvGamma(c0, C0). The SV variant replaces the sigma^2 step by one
sweep of the SV sampler on the residuals and reweights rows by exp(-h_t / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, qr, solve_triangular
from scipy.special import gammaln

from .errors import ValidationError
from .mixture import default_table
from .model import PriorSpec
from .rngtools import make_rng, normals
from .sampler import SamplerConfig, default_start, sv_update_step


@dataclass(frozen=True)
class RegressionData:
    """Response ``y`` (n) and design ``X`` (n x p) with a leading column of ones."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValidationError(f"design has shape {X.shape}; expected ({y.size}, p)")
        if X.shape[1] < 1:
            raise ValidationError("design needs at least one column")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValidationError("regression data contain missing or non-finite values")
        if y.size and not np.all(X[:, 0] == 1.0):
            raise ValidationError("first design column must be all ones")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def rank(self, tol: float = 1e-10) -> int:
        if self.n == 0:
            return 0
        _, r, _ = qr(self.X, mode="economic", pivoting=True)
        d = np.abs(np.diag(r))
        return int(np.sum(d > tol * d[0])) if d.size and d[0] > 0 else 0

    def head(self, t: int) -> "RegressionData":
        return RegressionData(self.y[:t], self.X[:t])


@dataclass(frozen=True)
class RegressionPrior:
    """beta ~ N(b0, sigma^2 B0) with B0inv = B0^{-1} stored; sigma^2 ~ InvGamma(c0, C0)."""

    b0: np.ndarray
    B0inv: np.ndarray
    c0: float = 0.001
    C0: float = 0.001

    def __post_init__(self):
        b0 = np.asarray(self.b0, dtype=float).ravel()
        B = np.atleast_2d(np.asarray(self.B0inv, dtype=float))
        if B.shape != (b0.size, b0.size):
            raise ValidationError(f"B0inv has shape {B.shape}; expected ({b0.size}, {b0.size})")
        if not np.allclose(B, B.T, rtol=0.0, atol=1e-12):
            raise ValidationError("B0inv must be symmetric")
        if np.linalg.eigvalsh(B).min() < -1e-12:
            raise ValidationError("B0inv must be nonnegative definite")
        if not (self.c0 > 0 and self.C0 > 0):
            raise ValidationError("c0 and C0 must be positive")
        object.__setattr__(self, "b0", b0)
        object.__setattr__(self, "B0inv", B)
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "C0", float(self.C0))

    @classmethod
    def vague(cls, p: int, precision: float = 1e-10, c0: float = 0.001, C0: float = 0.001):
        return cls(np.zeros(p), precision * np.eye(p), c0, C0)


@dataclass(frozen=True)
class HomoskedasticDraws:
    beta: np.ndarray
    sigma: np.ndarray

    def columns(self):
        p = self.beta.shape[1]
        return [f"beta_{j}" for j in range(p)] + ["sigma"]

    def matrix(self):
        return np.column_stack([self.beta, self.sigma])


@dataclass(frozen=True)
class SvRegressionDraws:
    beta: np.ndarray
    para: np.ndarray
    latent: np.ndarray
    latent0: np.ndarray

    def columns(self):
        p = self.beta.shape[1]
        n = self.latent.shape[1]
        return (["mu", "phi", "sigma"] + [f"beta_{j}" for j in range(p)]
                + [f"h_{t}" for t in range(1, n + 1)])

    def matrix(self):
        return np.column_stack([self.para, self.beta, self.latent])


def _check_compatible(data: RegressionData, prior: RegressionPrior):
    if prior.b0.size != data.p:
        raise ValidationError(f"prior has dimension {prior.b0.size}, design has {data.p} columns")
    if np.linalg.eigvalsh(prior.B0inv).min() <= 0 and data.rank() < data.p:
        raise ValidationError("design is rank deficient and the prior precision is singular")


def _chol_precision(P):
    try:
        return cholesky(P, lower=True)
    except np.linalg.LinAlgError:
        raise ValidationError("posterior precision X'X + B0inv is not positive definite") from None


class HomoskedasticKernel:
    """One Gibbs sweep (beta | sigma^2, y, then sigma^2 | beta, y) for a fixed design.

    Quantities not depending on y, such as the Cholesky factor of X'X + B0inv and
    the shape c_n, are computed once.
    """

    def __init__(self, X, prior: RegressionPrior):
        self.X = X
        self.prior = prior
        n, p = X.shape
        self.L = _chol_precision(X.T @ X + prior.B0inv)
        self.Bb = prior.B0inv @ prior.b0
        self.c_n = prior.c0 + n / 2.0 + p / 2.0

    def posterior_mean(self, y):
        return cho_solve((self.L, True), self.X.T @ y + self.Bb)

    def step(self, y, sigma2, rng, bT=None):
        if bT is None:
            bT = self.posterior_mean(y)
        p = bT.size
        beta = bT + math.sqrt(sigma2) * solve_triangular(self.L, normals(rng, p), lower=True, trans="T")
        e = y - self.X @ beta
        d = beta - self.prior.b0
        C_n = self.prior.C0 + 0.5 * (float(e @ e) + float(d @ self.prior.B0inv @ d))
        return beta, C_n / rng.gamma(self.c_n)


def gibbs_homoskedastic(data: RegressionData, prior: RegressionPrior, burnin: int, draws: int,
                        rng, thin: int = 1, sigma2_start: float = 1.0) -> HomoskedasticDraws:
    """Two-block Gibbs sampler: beta | sigma^2, then sigma^2 | beta."""
    _check_compatible(data, prior)
    if draws < 1 or burnin < 0 or thin < 1:
        raise ValidationError("need draws >= 1, burnin >= 0, thin >= 1")
    kernel = HomoskedasticKernel(data.X, prior)
    y = data.y
    bT = kernel.posterior_mean(y)

    kept = draws // thin
    beta_out = np.empty((kept, data.p))
    sig_out = np.empty(kept)
    sigma2 = float(sigma2_start)
    for it in range(1, burnin + draws + 1):
        beta, sigma2 = kernel.step(y, sigma2, rng, bT)
        i = it - burnin
        if i > 0 and i % thin == 0:
            beta_out[i // thin - 1] = beta
            sig_out[i // thin - 1] = math.sqrt(sigma2)
    return HomoskedasticDraws(beta_out, sig_out)


def sample_prior_homoskedastic(prior: RegressionPrior, draws: int, rng) -> HomoskedasticDraws:
    """Independent draws from the conjugate prior (needs a proper B0inv)."""
    L = _chol_precision(prior.B0inv)
    p = prior.b0.size
    sigma2 = prior.C0 / rng.gamma(prior.c0, size=draws)
    z = normals(rng, (p, draws))
    beta = prior.b0 + (np.sqrt(sigma2) * solve_triangular(L, z, lower=True, trans="T")).T
    return HomoskedasticDraws(beta, np.sqrt(sigma2))


def log_marginal_likelihood_conjugate(data: RegressionData, prior: RegressionPrior) -> float:
    """Closed-form log p(y) of the normal-inverse-gamma regression model."""
    X, y = data.X, data.y
    n = data.n
    L0 = _chol_precision(prior.B0inv)
    P = X.T @ X + prior.B0inv
    L = _chol_precision(P)
    Bb = prior.B0inv @ prior.b0
    bT = cho_solve((L, True), X.T @ y + Bb)
    c = prior.c0 + n / 2.0
    C = prior.C0 + 0.5 * (float(y @ y) + float(prior.b0 @ Bb) - float(bT @ P @ bT))
    return (-0.5 * n * math.log(2.0 * math.pi)
            + float(np.log(np.diag(L0)).sum()) - float(np.log(np.diag(L)).sum())
            + prior.c0 * math.log(prior.C0) - c * math.log(C)
            + gammaln(c) - gammaln(prior.c0))


def beta_step_weighted(X, y, h, prior: RegressionPrior, rng, z=None):
    """Draw beta | h with rows scaled by exp(-h_t / 2)."""
    w = np.exp(-h / 2.0)
    Xn = X * w[:, None]
    yn = y * w
    P = Xn.T @ Xn + prior.B0inv
    L = _chol_precision(P)
    mean = cho_solve((L, True), Xn.T @ yn + prior.B0inv @ prior.b0)
    if z is None:
        z = normals(rng, X.shape[1])
    return mean + solve_triangular(L, z, lower=True, trans="T")


def gibbs_sv_errors(data: RegressionData, prior: RegressionPrior, sv_prior: PriorSpec,
                    cfg: SamplerConfig, rng=None) -> SvRegressionDraws:
    """Regression with SV errors: one SV sweep on the residuals, then beta | h."""
    _check_compatible(data, prior)
    rng = rng if rng is not None else make_rng(cfg.seed)
    X, y = data.X, data.y
    n, p = data.n, data.p
    if n < 2:
        raise ValidationError("SV errors need at least 2 observations")
    table = default_table()

    P0 = X.T @ X + prior.B0inv
    beta = cho_solve((_chol_precision(P0), True), X.T @ y + prior.B0inv @ prior.b0)
    para, latent = default_start(y - X @ beta)
    if cfg.startpara is not None:
        para = cfg.startpara
    if cfg.startlatent is not None:
        latent = cfg.startlatent
    h = latent.h

    n_para = cfg.draws // cfg.thinpara
    n_lat = cfg.draws // cfg.thinlatent
    beta_out = np.empty((n_para, p))
    para_out = np.empty((n_para, 3))
    tidx = np.arange(1, n + 1, cfg.thintime)
    lat_out = np.empty((n_lat, tidx.size))
    lat0_out = np.empty(n_lat)
    for it in range(1, cfg.burnin + cfg.draws + 1):
        ytilde = y - X @ beta
        para, lp = sv_update_step(ytilde, para, h, sv_prior, rng, cfg.theta_cfg, table)
        h = lp.h
        beta = beta_step_weighted(X, y, h[1:], prior, rng)
        i = it - cfg.burnin
        if i > 0:
            if i % cfg.thinpara == 0:
                k = i // cfg.thinpara - 1
                beta_out[k] = beta
                para_out[k] = (para.mu, para.phi, para.sigma)
            if i % cfg.thinlatent == 0:
                k = i // cfg.thinlatent - 1
                lat_out[k] = h[tidx]
                lat0_out[k] = h[0]
    return SvRegressionDraws(beta_out, para_out, lat_out, lat0_out)


def sample_prior_sv_regression(prior: RegressionPrior, sv_prior: PriorSpec, draws: int, rng):
    """Draws of (beta, theta, h_0) from the prior; used for predicting the first observation."""
    L = _chol_precision(prior.B0inv)
    p = prior.b0.size
    beta = prior.b0 + solve_triangular(L, normals(rng, (p, draws)), lower=True, trans="T").T
    mu = sv_prior.b_mu + math.sqrt(sv_prior.B_mu) * normals(rng, draws)
    phi = 2.0 * rng.beta(sv_prior.a0, sv_prior.b0, size=draws) - 1.0
    sigma = np.abs(math.sqrt(sv_prior.B_sigma) * normals(rng, draws))
    h0 = mu + sigma / np.sqrt(1.0 - phi * phi) * normals(rng, draws)
    para = np.column_stack([mu, phi, sigma])
    return SvRegressionDraws(beta, para, h0[:, None], h0)


def ar1_design(series) -> RegressionData:
    """y = x_{2..n}, X = (1, x_{1..n-1}): an AR(1) model in levels."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 2:
        raise ValidationError("need at least 2 observations for an AR(1) design")
    return RegressionData(x[1:], np.column_stack([np.ones(x.size - 1), x[:-1]]))

