"""Domain types, data preparation, the SV simulator and prior densities.

The model: y_t | h_t ~ N(0, exp(h_t)), h_t | h_{t-1} ~ N(mu + phi (h_{t-1} - mu), sigma^2)
for t = 1..n, and h_0 ~ N(mu, sigma^2 / (1 - phi^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter
from scipy.special import betaln

from .errors import ValidationError
from .rngtools import normals

LOG_2PI = math.log(2.0 * math.pi)
_LOG2 = math.log(2.0)


@lru_cache(maxsize=64)
def _betaln(a0, b0):
    return float(betaln(a0, b0))


@dataclass(frozen=True)
class ReturnsSeries:
    """Mean-zero returns with optional date labels (carried through, never used)."""

    values: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        try:
            v = np.asarray(self.values, dtype=float).ravel()
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"returns must be numeric: {exc}") from None
        if v.size < 2:
            raise ValidationError(f"need at least 2 returns, got {v.size}")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValidationError(f"returns contain missing or non-finite values (first at index {bad})")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != v.size:
                raise ValidationError("labels must align 1:1 with values")
            object.__setattr__(self, "labels", labels)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def had_zeros(self) -> bool:
        return bool(np.any(self.values == 0.0))


@dataclass(frozen=True)
class SvParameters:
    mu: float
    phi: float
    sigma: float

    def __post_init__(self):
        for name in ("mu", "phi", "sigma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not math.isfinite(self.mu):
            raise ValidationError(f"mu must be finite, got {self.mu}")
        if not abs(self.phi) < 1.0:
            raise ValidationError(f"phi must lie in (-1, 1), got {self.phi}")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.phi, self.sigma])


@dataclass(frozen=True)
class LatentPath:
    """Log-variances h_0..h_n (index 0 is the initial state)."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).ravel()
        if h.size < 2:
            raise ValidationError("latent path needs h_0 and at least one h_t")
        if not np.all(np.isfinite(h)):
            raise ValidationError("latent path contains non-finite entries")
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.h.size - 1

    @property
    def h0(self) -> float:
        return float(self.h[0])


@dataclass(frozen=True)
class PriorSpec:
    """mu ~ N(b_mu, B_mu); (phi+1)/2 ~ Beta(a0, b0); sigma^2 ~ B_sigma * chi^2_1."""

    b_mu: float = 0.0
    B_mu: float = 10000.0
    a0: float = 5.0
    b0: float = 1.5
    B_sigma: float = 1.0

    def __post_init__(self):
        for name in ("b_mu", "B_mu", "a0", "b0", "B_sigma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not math.isfinite(self.b_mu):
            raise ValidationError("b_mu must be finite")
        for name in ("B_mu", "a0", "b0", "B_sigma"):
            val = getattr(self, name)
            if not (val > 0.0 and math.isfinite(val)):
                raise ValidationError(f"{name} must be positive, got {val}")

    @classmethod
    def from_cli(cls, priormu=(0.0, 100.0), priorphi=(5.0, 1.5), priorsigma=1.0):
        """Build from (mean, sd) for mu, (a0, b0) for phi and B_sigma."""
        return cls(b_mu=priormu[0], B_mu=float(priormu[1]) ** 2,
                   a0=priorphi[0], b0=priorphi[1], B_sigma=priorsigma)

    def to_dict(self) -> dict:
        return {"b_mu": self.b_mu, "B_mu": self.B_mu, "a0": self.a0, "b0": self.b0,
                "B_sigma": self.B_sigma}


@dataclass(frozen=True)
class SimOutput:
    returns: ReturnsSeries
    latent: LatentPath
    parameters: SvParameters
    seed: int | None = field(default=None)


def logret(prices, demean: bool = False, labels=None) -> ReturnsSeries:
    """Log returns log(p_{t+1}) - log(p_t), optionally minus their arithmetic mean."""
    p = np.asarray(prices, dtype=float).ravel()
    if p.size < 2:
        raise ValidationError(f"need at least 2 prices, got {p.size}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0.0):
        raise ValidationError("prices must be finite and strictly positive")
    r = np.diff(np.log(p))
    if demean:
        r = r - r.mean()
    if labels is not None:
        labels = tuple(labels)[1:]
    return ReturnsSeries(r, labels)


def svsim(n: int, params: SvParameters, seed: int | None = None,
          rng: np.random.Generator | None = None) -> SimOutput:
    """Simulate an SV series of length ``n``.

    Normals are consumed from one stream in the order
    h_0, h_1, y_1, h_2, y_2, ..., h_n, y_n.
    """
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    n = int(n)
    if not isinstance(params, SvParameters):
        raise ValidationError("params must be SvParameters")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(seed))
    z = normals(rng, 2 * n + 1)
    mu, phi, sigma = params.mu, params.phi, params.sigma
    h = np.empty(n + 1)
    h[0] = mu + sigma / math.sqrt(1.0 - phi * phi) * z[0]
    dev, _ = lfilter([1.0], [1.0, -phi], sigma * z[1::2], zi=[phi * (h[0] - mu)])
    h[1:] = mu + dev
    y = np.exp(h[1:] / 2.0) * z[2::2]
    return SimOutput(ReturnsSeries(y), LatentPath(h), params, seed)


def _check_beta_hyper(a0, b0):
    if not (a0 > 0 and b0 > 0):
        raise ValidationError(f"a0 and b0 must be positive, got ({a0}, {b0})")


def prior_phi_logdensity(phi, a0: float, b0: float):
    """Log density of phi when (phi + 1) / 2 ~ Beta(a0, b0); -inf outside (-1, 1)."""
    _check_beta_hyper(a0, b0)
    if isinstance(phi, float):
        if not abs(phi) < 1.0:
            return -math.inf
        return ((a0 - 1.0) * math.log1p(phi) + (b0 - 1.0) * math.log1p(-phi)
                - (a0 + b0 - 1.0) * _LOG2 - _betaln(a0, b0))
    phi = np.asarray(phi, dtype=float)
    inside = np.abs(phi) < 1.0
    x = np.where(inside, phi, 0.0)
    with np.errstate(divide="ignore"):
        out = ((a0 - 1.0) * np.log1p(x) + (b0 - 1.0) * np.log1p(-x)
               - (a0 + b0 - 1.0) * math.log(2.0) - betaln(a0, b0))
    out = np.where(inside, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def prior_phi_density(phi, a0: float, b0: float):
    return np.exp(prior_phi_logdensity(phi, a0, b0))


def prior_phi_moments(a0: float, b0: float) -> tuple[float, float]:
    """Mean and standard deviation of phi under the transformed beta prior."""
    _check_beta_hyper(a0, b0)
    s = a0 + b0
    mean = 2.0 * a0 / s - 1.0
    var = 4.0 * a0 * b0 / (s * s * (s + 1.0))
    return mean, math.sqrt(var)


def prior_logdensity_mu(mu, prior: PriorSpec):
    return -0.5 * (LOG_2PI + math.log(prior.B_mu)) - 0.5 * (mu - prior.b_mu) ** 2 / prior.B_mu


def prior_logdensity_sigma(sigma, prior: PriorSpec):
    """Log density of sigma > 0 when sigma^2 ~ Gamma(1/2, rate 1/(2 B_sigma)).

    Equals the half-normal with scale sqrt(B_sigma) once the Jacobian 2 sigma of
    sigma -> sigma^2 is applied.
    """
    if isinstance(sigma, float):
        if not sigma > 0.0:
            return -math.inf
        return 0.5 * math.log(2.0 / (math.pi * prior.B_sigma)) - 0.5 * sigma * sigma / prior.B_sigma
    sigma = np.asarray(sigma, dtype=float)
    rate = 0.5 / prior.B_sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        s2 = sigma * sigma
        lg = 0.5 * np.log(rate) - 0.5 * math.log(math.pi) - 0.5 * np.log(s2) - rate * s2
        out = np.where(sigma > 0.0, lg + math.log(2.0) + np.log(sigma), -np.inf)
    return float(out) if out.ndim == 0 else out


def prior_log_density_theta(params: SvParameters, prior: PriorSpec) -> float:
    return (prior_logdensity_mu(params.mu, prior)
            + prior_phi_logdensity(params.phi, prior.a0, prior.b0)
            + prior_logdensity_sigma(params.sigma, prior))


def latent_logdensity(h: np.ndarray, mu: float, phi: float, sigma: float) -> float:
    """log p(h_0..h_n | mu, phi, sigma) from the stationary start and AR(1) transitions."""
    s2 = sigma * sigma
    v0 = s2 / (1.0 - phi * phi)
    e = h[1:] - mu - phi * (h[:-1] - mu)
    n = h.size - 1
    return (-0.5 * (LOG_2PI + math.log(v0)) - 0.5 * (h[0] - mu) ** 2 / v0
            - 0.5 * n * (LOG_2PI + math.log(s2)) - 0.5 * float(e @ e) / s2)
