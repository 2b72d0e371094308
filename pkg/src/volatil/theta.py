"""Updates of (mu, phi, sigma) given the latent path, and their interweaving.

Centered: the parameters live in the state equation and are drawn from
p(theta | h) by Metropolis-Hastings with an independence proposal fitted to the
AR(1) regression of h_t on (1, h_{t-1}).

Noncentered: with htilde = (h - mu) / sigma fixed, mu and sigma become
regression coefficients in the linearized observation equation
ystar_t - m_{r_t} = mu + sigma * htilde_t + eps_t, eps_t ~ N(0, v_{r_t}).
The prior +-sigma ~ N(0, B_sigma) is conjugate there, so (mu, sigma) is a
Gibbs draw; phi gets a Metropolis-Hastings step on p(phi | htilde).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import gammaln

from .errors import SamplerError, ValidationError
from .mixture import LinearizedData, MixtureTable
from .model import (
    LOG_2PI,
    PriorSpec,
    SvParameters,
    latent_logdensity,
    prior_logdensity_mu,
    prior_logdensity_sigma,
    prior_phi_logdensity,
)
from .rngtools import normals, uniforms

_FLOOR = 1e-12


@dataclass(frozen=True)
class ThetaUpdateConfig:
    baseline: Literal["centered", "noncentered"] = "centered"
    interweave: bool = True
    proposal: Literal["independence", "random_walk"] = "independence"
    rw_scales: tuple = (0.1, 0.01, 0.01)

    def __post_init__(self):
        if self.baseline not in ("centered", "noncentered"):
            raise ValidationError(f"baseline must be 'centered' or 'noncentered', got {self.baseline!r}")
        if self.proposal not in ("independence", "random_walk"):
            raise ValidationError(f"unknown proposal {self.proposal!r}")
        scales = tuple(float(s) for s in self.rw_scales)
        if len(scales) != 3 or not all(s > 0 for s in scales):
            raise ValidationError("rw_scales must be 3 positive numbers")
        object.__setattr__(self, "rw_scales", scales)

    @property
    def name(self) -> str:
        """Sampler banner name, e.g. GIS_C for interweaving with a centered baseline."""
        base = "C" if self.baseline == "centered" else "NC"
        return f"GIS_{base}" if self.interweave else base


@dataclass(frozen=True)
class ThetaDrawResult:
    params: SvParameters
    accepted: bool
    stage: str
    h: np.ndarray | None = None


def _chol2(a11, a12, a22):
    l11 = math.sqrt(a11)
    l21 = a12 / l11
    schur = a22 - l21 * l21
    if not schur > 0.0:
        raise SamplerError(f"2x2 precision not positive definite (schur complement {schur!r})")
    return l11, l21, math.sqrt(schur)


def _solve2(a11, a12, a22, b1, b2):
    det = a11 * a22 - a12 * a12
    return (a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det


def _log_target_centered(h, mu, phi, sigma, prior: PriorSpec) -> float:
    return (latent_logdensity(h, mu, phi, sigma) + prior_logdensity_mu(mu, prior)
            + prior_phi_logdensity(phi, prior.a0, prior.b0)
            + prior_logdensity_sigma(sigma, prior))


class _RegressionProposal:
    """Normal/inverse-gamma fit of h_t = gamma + phi h_{t-1} + sigma eta_t.

    Draws (gamma, phi, sigma^2) and evaluates the proposal log density in those
    coordinates, where gamma = mu (1 - phi). The regressor is centered at its
    mean internally, which makes the coefficient covariance diagonal.
    """

    def __init__(self, h):
        x = h[:-1]
        yv = h[1:]
        n = yv.size
        self.n = n
        self.xbar = float(x.mean())
        xc = x - self.xbar
        self.sxx = max(float(xc @ xc), _FLOOR)
        self.ybar = float(yv.mean())
        self.phi_hat = float(xc @ yv) / self.sxx
        resid = yv - self.ybar - self.phi_hat * xc
        self.shape = max((n - 2) / 2.0, 0.5)
        self.scale = max(0.5 * float(resid @ resid), _FLOOR)
        self._const = (self.shape * math.log(self.scale) - gammaln(self.shape)
                       - LOG_2PI + 0.5 * (math.log(n) + math.log(self.sxx)))

    def draw(self, rng):
        s2 = self.scale / rng.gamma(self.shape)
        z0, z1 = normals(rng, 2)
        phi = self.phi_hat + math.sqrt(s2 / self.sxx) * z1
        level = self.ybar + math.sqrt(s2 / self.n) * z0
        return level - phi * self.xbar, phi, s2

    def logpdf(self, gamma, phi, s2) -> float:
        d0 = gamma + phi * self.xbar - self.ybar
        d1 = phi - self.phi_hat
        return (self._const - (self.shape + 2.0) * math.log(s2)
                - (self.scale + 0.5 * (self.n * d0 * d0 + self.sxx * d1 * d1)) / s2)


def _log_target_regression_coords(h, gamma, phi, s2, prior):
    """Centered posterior density expressed in (gamma, phi, sigma^2) coordinates."""
    mu = gamma / (1.0 - phi)
    sigma = math.sqrt(s2)
    jac = -math.log(1.0 - phi) - math.log(2.0 * sigma)
    return _log_target_centered(h, mu, phi, sigma, prior) + jac


def update_theta_centered(h, params: SvParameters, prior: PriorSpec,
                          cfg: ThetaUpdateConfig, rng, proposal=None) -> ThetaDrawResult:
    """One MH step targeting p(theta | h).

    ``proposal`` forces the proposed (mu, phi, sigma); only meant for testing the
    acceptance machinery.
    """
    h = h.h if hasattr(h, "h") else h
    mu, phi, sigma = params.mu, params.phi, params.sigma

    if cfg.proposal == "random_walk":
        if proposal is None:
            z = normals(rng, 3)
            proposal = (mu + cfg.rw_scales[0] * z[0], phi + cfg.rw_scales[1] * z[1],
                        sigma + cfg.rw_scales[2] * z[2])
        mu_p, phi_p, sig_p = map(float, proposal)
        u = uniforms(rng)
        if not (abs(phi_p) < 1.0 and sig_p > 0.0):
            return ThetaDrawResult(params, False, "centered")
        log_ratio = (_log_target_centered(h, mu_p, phi_p, sig_p, prior)
                     - _log_target_centered(h, mu, phi, sigma, prior))
    else:
        q = _RegressionProposal(h)
        if proposal is None:
            gamma_p, phi_p, s2_p = q.draw(rng)
        else:
            mu_f, phi_p, sig_f = map(float, proposal)
            gamma_p, s2_p = mu_f * (1.0 - phi_p), sig_f * sig_f
        u = uniforms(rng)
        if not (abs(phi_p) < 1.0 and s2_p > 0.0):
            return ThetaDrawResult(params, False, "centered")
        gamma = mu * (1.0 - phi)
        s2 = sigma * sigma
        log_ratio = (_log_target_regression_coords(h, gamma_p, phi_p, s2_p, prior)
                     - _log_target_regression_coords(h, gamma, phi, s2, prior)
                     + q.logpdf(gamma, phi, s2) - q.logpdf(gamma_p, phi_p, s2_p))
        mu_p, sig_p = gamma_p / (1.0 - phi_p), math.sqrt(s2_p)

    if math.log(u) < log_ratio:
        return ThetaDrawResult(SvParameters(mu_p, phi_p, sig_p), True, "centered")
    return ThetaDrawResult(params, False, "centered")


def _draw_mu_sigma_noncentered(htilde, ystar, r, prior: PriorSpec, table: MixtureTable, rng):
    w = table.inv_var[r]
    resp = ystar - table.means[r]
    x = htilde[1:]
    wx = w * x
    p11 = 1.0 / prior.B_mu + float(w.sum())
    p12 = float(wx.sum())
    p22 = 1.0 / prior.B_sigma + max(float(wx @ x), _FLOOR)
    m0, m1 = _solve2(p11, p12, p22, prior.b_mu / prior.B_mu + float(w @ resp), float(wx @ resp))
    l11, l21, l22 = _chol2(p11, p12, p22)
    z0, z1 = normals(rng, 2)
    x1 = z1 / l22
    x0 = (z0 - l21 * x1) / l11
    return m0 + x0, m1 + x1


def _log_target_phi_noncentered(phi, h0, cross, sq, prior):
    # transitions contribute phi*cross - phi^2*sq/2 up to a constant
    v0 = 1.0 / (1.0 - phi * phi)
    return (prior_phi_logdensity(phi, prior.a0, prior.b0)
            - 0.5 * math.log(v0) - 0.5 * h0 * h0 / v0
            + phi * cross - 0.5 * phi * phi * sq)


def _update_phi_noncentered(htilde, phi, prior, cfg, rng):
    prev, nxt = htilde[:-1], htilde[1:]
    sq = float(prev @ prev)
    cross = float(prev @ nxt)
    h0 = float(htilde[0])
    if cfg.proposal == "random_walk":
        phi_p = phi + cfg.rw_scales[1] * float(normals(rng))
        u = uniforms(rng)
        if not abs(phi_p) < 1.0:
            return phi, False
        log_ratio = (_log_target_phi_noncentered(phi_p, h0, cross, sq, prior)
                     - _log_target_phi_noncentered(phi, h0, cross, sq, prior))
    else:
        s = max(sq, _FLOOR)
        center = cross / s
        phi_p = center + float(normals(rng)) / math.sqrt(s)
        u = uniforms(rng)
        if not abs(phi_p) < 1.0:
            return phi, False
        log_ratio = (_log_target_phi_noncentered(phi_p, h0, cross, sq, prior)
                     - _log_target_phi_noncentered(phi, h0, cross, sq, prior)
                     + 0.5 * s * ((phi_p - center) ** 2 - (phi - center) ** 2))
    if math.log(u) < log_ratio:
        return phi_p, True
    return phi, False


def update_theta_noncentered(h, ystar, r, params: SvParameters, prior: PriorSpec,
                             table: MixtureTable, cfg: ThetaUpdateConfig, rng) -> ThetaDrawResult:
    """Update theta with htilde = (h - mu) / sigma held fixed.

    Returns the new parameters together with the implied centered path
    h = mu + sigma * htilde in ``result.h``.
    """
    h = h.h if hasattr(h, "h") else h
    ys = ystar.ystar if isinstance(ystar, LinearizedData) else ystar
    htilde = (h - params.mu) / params.sigma

    mu_new, sig_new = _draw_mu_sigma_noncentered(htilde, ys, r, prior, table, rng)
    if sig_new < 0.0:
        # (sigma, htilde) -> (-sigma, -htilde) leaves the model invariant
        sig_new, htilde = -sig_new, -htilde
    elif sig_new == 0.0:
        mu_new, sig_new = params.mu, params.sigma

    phi_new, accepted = _update_phi_noncentered(htilde, params.phi, prior, cfg, rng)
    new = SvParameters(mu_new, phi_new, sig_new)
    return ThetaDrawResult(new, accepted, "noncentered", mu_new + sig_new * htilde)


def asis_step(h, params: SvParameters, ystar, r, prior: PriorSpec, table: MixtureTable,
              cfg: ThetaUpdateConfig, rng):
    """Baseline update, then (if interweaving) the update in the other parameterization.

    Returns ``(h, params, accepted)`` where ``accepted`` maps stage name to the MH
    outcome of that stage (None when the stage did not run).
    """
    h = h.h if hasattr(h, "h") else h
    accepted = {"centered": None, "noncentered": None}
    stages = ["centered", "noncentered"]
    if cfg.baseline == "noncentered":
        stages.reverse()
    if not cfg.interweave:
        stages = stages[:1]
    for stage in stages:
        if stage == "centered":
            res = update_theta_centered(h, params, prior, cfg, rng)
        else:
            res = update_theta_noncentered(h, ystar, r, params, prior, table, cfg, rng)
            h = res.h
        params = res.params
        accepted[stage] = res.accepted
    return h, params, accepted
