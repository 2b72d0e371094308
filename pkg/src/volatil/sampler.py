"""The full SV sampler loop, the single-sweep update, summaries and forecasts."""

from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import ess_batch_means
from .errors import ValidationError
from .latent import build_system, sample_latent
from .mixture import MixtureTable, default_table, linearize, sample_indicators
from .model import LatentPath, PriorSpec, ReturnsSeries, SvParameters
from .rngtools import make_rng, normals, task_seed
from .theta import ThetaUpdateConfig, asis_step

PARA_NAMES = ("mu", "phi", "sigma")
DEFAULT_QUANTILES = (0.05, 0.5, 0.95)


@dataclass(frozen=True)
class SamplerConfig:
    burnin: int = 1000
    draws: int = 10000
    thinpara: int = 1
    thinlatent: int = 1
    thintime: int = 1
    quiet: bool = False
    startpara: SvParameters | None = None
    startlatent: LatentPath | None = None
    seed: int | None = None
    theta_cfg: ThetaUpdateConfig = field(default_factory=ThetaUpdateConfig)

    def __post_init__(self):
        for name in ("burnin", "draws", "thinpara", "thinlatent", "thintime"):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val:
                raise ValidationError(f"{name} must be an integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if self.burnin < 0:
            raise ValidationError("burnin must be nonnegative")
        if self.draws < 1:
            raise ValidationError("draws must be at least 1")
        for name in ("thinpara", "thinlatent", "thintime"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be at least 1")
        if self.startpara is not None and not isinstance(self.startpara, SvParameters):
            raise ValidationError("startpara must be SvParameters")
        if self.startlatent is not None and not isinstance(self.startlatent, LatentPath):
            raise ValidationError("startlatent must be a LatentPath")


@dataclass(frozen=True)
class Thinning:
    para: int = 1
    latent: int = 1
    time: int = 1

    def time_index(self, n: int) -> np.ndarray:
        """Stored time indices t (1-based; h_0 is stored separately)."""
        return np.arange(1, n + 1, self.time)

    def para_iterations(self, rows: int) -> np.ndarray:
        return self.para * np.arange(1, rows + 1)

    def latent_iterations(self, rows: int) -> np.ndarray:
        return self.latent * np.arange(1, rows + 1)


@dataclass(frozen=True)
class SummaryTable:
    quantiles: tuple
    para: dict
    latent: dict


@dataclass(frozen=True)
class SvDraws:
    para: np.ndarray
    latent: np.ndarray
    latent0: np.ndarray
    y: ReturnsSeries
    runtime: float
    priors: PriorSpec
    thinning: Thinning
    summary: SummaryTable | None
    meta: dict = field(default_factory=dict)

    @property
    def latent_times(self) -> np.ndarray:
        return self.thinning.time_index(len(self.y))


def default_start(values) -> tuple[SvParameters, LatentPath]:
    """theta = (log var(y), 0.9, 0.1) and a flat latent path at log var(y)."""
    values = np.asarray(values, dtype=float)
    var = float(np.var(values, ddof=1)) if values.size > 1 else 0.0
    if not var > 0.0:
        var = float(np.mean(values * values))
    level = math.log(var) if var > 0.0 else -10.0
    return SvParameters(level, 0.9, 0.1), LatentPath(np.full(values.size + 1, level))


def _sweep(ystar, h, params, prior, table, theta_cfg, rng):
    r = sample_indicators(ystar, h, table, rng)
    system = build_system(ystar, r, params, table)
    h = sample_latent(system, rng).h
    return asis_step(h, params, ystar, r, prior, table, theta_cfg, rng)


def sv_update_step(ytilde, startpara: SvParameters, startlatent, prior: PriorSpec, rng,
                   theta_cfg: ThetaUpdateConfig | None = None,
                   table: MixtureTable | None = None):
    """One composite MCMC sweep from a caller-held state.

    Intended for embedding SV errors in another Gibbs sampler: pass the current
    residuals, parameters and latent path; get the next ones back.
    """
    values = ytilde.values if isinstance(ytilde, ReturnsSeries) else np.asarray(ytilde, dtype=float)
    h = startlatent.h if isinstance(startlatent, LatentPath) else np.asarray(startlatent, dtype=float)
    if not isinstance(startpara, SvParameters):
        raise ValidationError(f"startpara must be SvParameters, got {type(startpara).__name__}")
    if h.size != values.size + 1:
        raise ValidationError(
            f"startlatent has {h.size} entries; expected {values.size + 1} (h_0..h_n for n={values.size})")
    theta_cfg = theta_cfg or ThetaUpdateConfig()
    table = table or default_table()
    ystar = linearize(values).ystar
    h, params, _ = _sweep(ystar, h, startpara, prior, table, theta_cfg, rng)
    return params, LatentPath(h)


def _progress(msg, quiet):
    if not quiet:
        print(msg, file=sys.stderr, flush=True)


def svsample(y, prior: PriorSpec | None = None, cfg: SamplerConfig | None = None,
             rng: np.random.Generator | None = None,
             quantiles=DEFAULT_QUANTILES, table: MixtureTable | None = None) -> SvDraws:
    """Run burn-in plus draws sweeps and store thinned draws with a summary."""
    if not isinstance(y, ReturnsSeries):
        y = ReturnsSeries(y)
    prior = prior or PriorSpec()
    cfg = cfg or SamplerConfig()
    if not isinstance(prior, PriorSpec) or not isinstance(cfg, SamplerConfig):
        raise ValidationError("prior must be PriorSpec and cfg SamplerConfig")
    table = table or default_table()
    n = len(y)
    params, latent = default_start(y.values)
    if cfg.startpara is not None:
        params = cfg.startpara
    if cfg.startlatent is not None:
        if cfg.startlatent.n != n:
            raise ValidationError(f"startlatent has length {cfg.startlatent.h.size}, expected {n + 1}")
        latent = cfg.startlatent
    h = latent.h
    rng = rng if rng is not None else make_rng(cfg.seed)
    ystar = linearize(y).ystar

    thinning = Thinning(cfg.thinpara, cfg.thinlatent, cfg.thintime)
    tidx = thinning.time_index(n)
    n_para = cfg.draws // cfg.thinpara
    n_lat = cfg.draws // cfg.thinlatent
    para = np.empty((n_para, 3))
    lat = np.empty((n_lat, tidx.size))
    lat0 = np.empty(n_lat)
    acc_counts = {"centered": 0, "noncentered": 0}

    total = cfg.burnin + cfg.draws
    _progress(f"Calling {cfg.theta_cfg.name} MCMC sampler with {total} iter. Series length is {n}.",
              cfg.quiet)
    tick = max(total // 10, 1)
    start = time.perf_counter()
    for it in range(1, total + 1):
        h, params, acc = _sweep(ystar, h, params, prior, table, cfg.theta_cfg, rng)
        i = it - cfg.burnin
        if i > 0:
            for k, v in acc.items():
                acc_counts[k] += bool(v)
            if i % cfg.thinpara == 0:
                para[i // cfg.thinpara - 1] = (params.mu, params.phi, params.sigma)
            if i % cfg.thinlatent == 0:
                row = i // cfg.thinlatent - 1
                lat[row] = h[tidx]
                lat0[row] = h[0]
        if it % tick == 0:
            _progress(f"  {100 * it // total}%", cfg.quiet)
    runtime = time.perf_counter() - start
    _progress(f"Timing (elapsed): {runtime:.2f} seconds.\n{total / runtime:.0f} iterations per second.",
              cfg.quiet)

    meta = {
        "seed": cfg.seed,
        "burnin": cfg.burnin,
        "draws": cfg.draws,
        "sampler": cfg.theta_cfg.name,
        "mixture_checksum": table.checksum,
        "acceptance": {k: v / cfg.draws for k, v in acc_counts.items()},
    }
    d = SvDraws(para, lat, lat0, y, runtime, prior, thinning, None, meta)
    return updatesummary(d, quantiles)


def _record(x, quantiles):
    x = np.asarray(x, dtype=float)
    return {
        "mean": float(x.mean()),
        "sd": float(x.std(ddof=1)) if x.size > 1 and np.ptp(x) > 0 else 0.0,
        "quantiles": [float(q) for q in np.quantile(x, quantiles)],
        "ess": float(ess_batch_means(x)),
    }


def updatesummary(d: SvDraws, quantiles=DEFAULT_QUANTILES) -> SvDraws:
    """Recompute the summary table with the requested posterior quantiles."""
    quantiles = tuple(float(q) for q in quantiles)
    if not quantiles:
        raise ValidationError("at least one quantile is required")
    if not all(0.0 < q < 1.0 for q in quantiles):
        raise ValidationError("quantiles must lie in (0, 1)")
    quantiles = tuple(sorted(quantiles))
    para = {}
    if d.para.shape[0] > 0:
        mu, phi, sigma = d.para.T
        for name, x in (("mu", mu), ("phi", phi), ("sigma", sigma),
                        ("exp(mu/2)", np.exp(mu / 2.0)), ("sigma^2", sigma * sigma)):
            para[name] = _record(x, quantiles)
    latent = {}
    if d.latent.shape[0] > 0:
        vol = 100.0 * np.exp(d.latent / 2.0)
        m = vol.shape[0]
        latent = {
            "time": d.latent_times.tolist(),
            "mean": vol.mean(axis=0),
            "sd": (np.where(np.ptp(vol, axis=0) > 0, vol.std(axis=0, ddof=1), 0.0)
                   if m > 1 else np.zeros(vol.shape[1])),
            "quantiles": np.quantile(vol, quantiles, axis=0).T,
            "ess": ess_batch_means(vol) if m > 1 else np.full(vol.shape[1], float(m)),
        }
    return replace(d, summary=SummaryTable(quantiles, para, latent))


def residuals(d: SvDraws, type: str = "mean") -> np.ndarray:
    """Summary over draws of the standardized residuals y_t / exp(h_t / 2)."""
    if type not in ("mean", "median"):
        raise ValidationError(f"type must be 'mean' or 'median', got {type!r}")
    if d.thinning.time != 1:
        raise ValidationError(
            "residuals need the latent draws of every time point; rerun with thintime = 1")
    std = d.y.values / np.exp(d.latent / 2.0)
    return std.mean(axis=0) if type == "mean" else np.median(std, axis=0)


def paired_draws(d: SvDraws):
    """(theta rows, h_n values) for iterations where both were stored."""
    n = len(d.y)
    times = d.latent_times
    if times[-1] != n:
        raise ValidationError(f"h_{n} was not stored (thintime={d.thinning.time}); cannot forecast")
    it_p = d.thinning.para_iterations(d.para.shape[0])
    it_l = d.thinning.latent_iterations(d.latent.shape[0])
    common, ip, il = np.intersect1d(it_p, it_l, return_indices=True)
    if common.size == 0:
        raise ValidationError("no iteration has both parameter and latent draws stored")
    return d.para[ip], d.latent[il, -1]


def predict_volatility(d: SvDraws, horizon: int, rng=None, z=None) -> np.ndarray:
    """Draws of h_{n+1..n+horizon} (rows = paired stored draws).

    Convert with ``100 * exp(h / 2)`` for percent volatility.
    """
    if int(horizon) != horizon or horizon < 1:
        raise ValidationError("horizon must be a positive integer")
    horizon = int(horizon)
    theta, hn = paired_draws(d)
    mu, phi, sigma = theta.T
    if z is None:
        z = normals(rng, (horizon, hn.size))
    out = np.empty((hn.size, horizon))
    h = hn.copy()
    for k in range(horizon):
        h = mu + phi * (h - mu) + sigma * z[k]
        out[:, k] = h
    return out


def _run_chain(args):
    y, prior, cfg = args
    return svsample(y, prior, cfg)


def svsample_chains(y, prior: PriorSpec, cfg: SamplerConfig, chains: int, workers: int = 1):
    """Run independent chains with seeds derived from ``cfg.seed`` and the chain number."""
    if chains < 1:
        raise ValidationError("chains must be at least 1")
    base = cfg.seed if cfg.seed is not None else 0
    jobs = [(y, prior, replace(cfg, seed=task_seed(base, "chain", c), quiet=True))
            for c in range(chains)]
    if workers > 1 and chains > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_chain, jobs))
    return [_run_chain(j) for j in jobs]


def merge_chains(parts, quantiles=DEFAULT_QUANTILES) -> SvDraws:
    """Concatenate chains; ``meta['chain_para']`` / ``meta['chain_latent']`` label rows."""
    first = parts[0]
    meta = dict(first.meta)
    meta["chains"] = len(parts)
    meta["chain_seeds"] = [p.meta.get("seed") for p in parts]
    meta["chain_para"] = np.concatenate([np.full(p.para.shape[0], c) for c, p in enumerate(parts)])
    meta["chain_latent"] = np.concatenate([np.full(p.latent.shape[0], c) for c, p in enumerate(parts)])
    merged = replace(
        first,
        para=np.concatenate([p.para for p in parts]),
        latent=np.concatenate([p.latent for p in parts]),
        latent0=np.concatenate([p.latent0 for p in parts]),
        runtime=sum(p.runtime for p in parts),
        meta=meta,
    )
    return updatesummary(merged, quantiles)
