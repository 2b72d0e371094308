"""One-step-ahead predictive likelihoods, cumulative log predictive Bayes factors and
the rolling refit harness.

For each t, a model is fitted on observations 1..t only; its posterior draws give
an M-component normal mixture for y_{t+1}, whose log density at the realized
y_{t+1} is log PL_{t+1}. Summing log PL_t over t = 1..n gives the log marginal
likelihood; differences between two models give log predictive Bayes factors.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import SamplerError, ValidationError
from .garch import garch_rwmh
from .linreg import (
    RegressionData,
    RegressionPrior,
    gibbs_homoskedastic,
    gibbs_sv_errors,
    sample_prior_homoskedastic,
    sample_prior_sv_regression,
)
from .model import LOG_2PI, PriorSpec
from .rngtools import make_rng, normals, task_seed
from .sampler import SamplerConfig
from .theta import ThetaUpdateConfig

MODELS = ("homoskedastic", "sv", "garch")
DEFAULT_PRED_QUANTILES = (0.01, 0.5, 0.99)


@dataclass(frozen=True)
class PredictiveRecord:
    t: int
    log_pl: float
    pred_quantiles: dict
    model_tag: str

    def __post_init__(self):
        if not math.isfinite(self.log_pl):
            raise SamplerError(f"non-finite log predictive likelihood at t={self.t}")
        vals = [self.pred_quantiles[p] for p in sorted(self.pred_quantiles)]
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise SamplerError("predictive quantiles are not monotone")


@dataclass(frozen=True)
class FitConfig:
    """Settings shared by all refits of a rolling evaluation."""

    burnin: int = 1000
    draws: int = 10000
    thin: int = 1
    reg_prior: RegressionPrior | None = None
    sv_prior: PriorSpec = field(default_factory=PriorSpec)
    theta_cfg: ThetaUpdateConfig = field(default_factory=ThetaUpdateConfig)
    garch_scales: tuple = (0.1, 0.1, 0.1)

    def __post_init__(self):
        if self.burnin < 0 or self.draws < 1 or self.thin < 1:
            raise ValidationError("need burnin >= 0, draws >= 1, thin >= 1")

    def prior_for(self, p: int) -> RegressionPrior:
        return self.reg_prior if self.reg_prior is not None else RegressionPrior.vague(p)

    def to_dict(self) -> dict:
        prior = self.reg_prior
        return {
            "burnin": self.burnin, "draws": self.draws, "thin": self.thin,
            "reg_prior": None if prior is None else {
                "b0": prior.b0.tolist(), "B0inv": prior.B0inv.tolist(),
                "c0": prior.c0, "C0": prior.C0},
            "sv_prior": self.sv_prior.to_dict(),
            "theta_cfg": asdict(self.theta_cfg),
            "garch_scales": list(self.garch_scales),
        }


def log_mean_exp(logd) -> float:
    logd = np.asarray(logd, dtype=float)
    return float(logsumexp(logd) - math.log(logd.size))


def _location_scale(model_tag, draws, x_next, rng):
    """Per-draw predictive mean and standard deviation of y_{t+1}."""
    x = np.asarray(x_next, dtype=float).ravel()
    mean = draws.beta @ x
    if model_tag == "homoskedastic":
        sd = np.asarray(draws.sigma, dtype=float)
    elif model_tag == "sv":
        mu, phi, sigma = draws.para[:, 0], draws.para[:, 1], draws.para[:, 2]
        h_t = draws.latent[:, -1]
        h_next = mu + phi * (h_t - mu) + sigma * normals(rng, mu.size)
        sd = np.exp(h_next / 2.0)
    elif model_tag == "garch":
        a = draws.alpha
        s2 = a[:, 0] + a[:, 1] * draws.resid_last ** 2 + a[:, 2] * draws.sigma2_last
        sd = np.sqrt(s2)
    else:
        raise ValidationError(f"unknown model {model_tag!r}; expected one of {MODELS}")
    return mean, sd


def predictive_step(model_tag: str, draws, y_next: float, x_next, rng, M: int | None = None,
                    t: int = 0, quantiles=DEFAULT_PRED_QUANTILES) -> PredictiveRecord:
    """log PL for one time point from posterior draws fitted on data up to t.

    ``x_next`` is the design row for the predicted observation, e.g. (1, y_t) in the
    AR(1) setup. The last M stored draws are used (all of them by default).
    """
    mean, sd = _location_scale(model_tag, draws, x_next, rng)
    K = mean.size
    M = K if M is None else int(M)
    if M < 1:
        raise ValidationError("M must be at least 1")
    if M > K:
        raise ValidationError(f"M={M} exceeds the {K} available posterior draws")
    mean, sd = mean[K - M:], sd[K - M:]
    z = (float(y_next) - mean) / sd
    logd = -0.5 * (LOG_2PI + z * z) - np.log(sd)
    log_pl = log_mean_exp(logd)
    if np.any(np.isnan(logd)) or not math.isfinite(log_pl):
        raise SamplerError(f"predictive densities are not finite at t={t}")
    ysim = mean + sd * normals(rng, M)
    qs = sorted(float(q) for q in quantiles)
    qv = np.quantile(ysim, qs)
    return PredictiveRecord(int(t), log_pl, dict(zip(qs, map(float, qv))), model_tag)


def fit_model(model_tag: str, data: RegressionData, cfg: FitConfig, rng):
    """Posterior draws on ``data``; with no observations, draws from the prior."""
    prior = cfg.prior_for(data.p)
    if model_tag == "homoskedastic":
        if data.n == 0:
            return sample_prior_homoskedastic(prior, cfg.draws // cfg.thin, rng)
        return gibbs_homoskedastic(data, prior, cfg.burnin, cfg.draws, rng, thin=cfg.thin)
    if model_tag == "sv":
        if data.n == 0:
            return sample_prior_sv_regression(prior, cfg.sv_prior, cfg.draws // cfg.thin, rng)
        scfg = SamplerConfig(burnin=cfg.burnin, draws=cfg.draws, thinpara=cfg.thin,
                             thinlatent=cfg.thin, quiet=True, theta_cfg=cfg.theta_cfg)
        return gibbs_sv_errors(data, prior, cfg.sv_prior, scfg, rng)
    if model_tag == "garch":
        if data.n == 0:
            raise ValidationError("the GARCH benchmark has flat priors; it cannot predict without data")
        return garch_rwmh(data, prior, cfg.draws, cfg.burnin, cfg.garch_scales, rng, thin=cfg.thin)
    raise ValidationError(f"unknown model {model_tag!r}; expected one of {MODELS}")


@dataclass(frozen=True)
class TaskFailure:
    model_tag: str
    t: int
    error: str


def _run_task(args):
    model_tag, t, data, cfg, M, seed, quantiles = args
    rng = make_rng(task_seed(seed, model_tag, t))
    try:
        draws = fit_model(model_tag, data.head(t), cfg, rng)
        return predictive_step(model_tag, draws, data.y[t], data.X[t], rng, M, t + 1, quantiles)
    except (ValueError, SamplerError, np.linalg.LinAlgError) as exc:
        return TaskFailure(model_tag, t + 1, f"{type(exc).__name__}: {exc}")


@dataclass
class EvaluationResult:
    records: dict
    failures: list
    s: int
    seed: int

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def rolling_evaluation(data: RegressionData, s: int, models, cfg: FitConfig, M: int | None = None,
                       parallelism: int = 1, seed: int = 0,
                       quantiles=DEFAULT_PRED_QUANTILES) -> EvaluationResult:
    """Refit every model on observations 1..t and predict t+1, for t = s..n-1.

    Records are indexed by the predicted time t+1. Each (model, t) task seeds its
    own generator from ``seed`` and the task key, so the output does not depend on
    ``parallelism`` or scheduling order.
    """
    n = data.n
    if not 0 <= s < n:
        raise ValidationError(f"training cutoff must satisfy 0 <= s < n={n}, got {s}")
    models = list(dict.fromkeys(models))
    for m in models:
        if m not in MODELS:
            raise ValidationError(f"unknown model {m!r}; expected one of {MODELS}")
    if parallelism < 1:
        raise ValidationError("parallelism must be at least 1")
    tasks = [(m, t, data, cfg, M, int(seed), tuple(quantiles)) for m in models for t in range(s, n)]
    if parallelism == 1:
        results = [_run_task(a) for a in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * parallelism))
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=chunk))
    records = {m: [] for m in models}
    failures = []
    for res in results:
        if isinstance(res, TaskFailure):
            failures.append(res)
        else:
            records[res.model_tag].append(res)
    for m in models:
        records[m].sort(key=lambda r: r.t)
    return EvaluationResult(records, failures, s, int(seed))


@dataclass(frozen=True)
class BayesFactorSeries:
    s: int
    times: np.ndarray
    cumulative: np.ndarray

    @property
    def final(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0


def cumulative_bayes_factor(a, b, s: int) -> BayesFactorSeries:
    """Running sum of log PL_t(A) - log PL_t(B) for t = s+1, s+2, ..."""
    ta = [r.t for r in a]
    tb = [r.t for r in b]
    if ta != tb:
        raise ValidationError("records of the two models are not aligned in time")
    if ta and (ta[0] != s + 1 or ta != list(range(s + 1, s + 1 + len(ta)))):
        raise ValidationError(f"records must cover t = {s + 1}, {s + 2}, ... without gaps")
    diff = np.array([ra.log_pl - rb.log_pl for ra, rb in zip(a, b)], dtype=float)
    return BayesFactorSeries(int(s), np.array(ta, dtype=int), np.cumsum(diff))


def log_marginal_likelihood(records) -> float:
    """Sum of log PL_t over records sorted by t and covering t = 1..n."""
    ts = [r.t for r in records]
    if ts != list(range(1, len(ts) + 1)):
        raise ValidationError("records must be sorted and cover t = 1..n without gaps")
    return float(sum(r.log_pl for r in records))
