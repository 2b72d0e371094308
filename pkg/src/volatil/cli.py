"""Command-line front end: ``volatil {simulate,fit,regress,evaluate}``.

Exit codes: 0 success, 2 invalid input or usage, 3 sampler/internal failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fileio
from .errors import SamplerError, ValidationError
from .garch import garch_rwmh
from .linreg import (
    RegressionData,
    RegressionPrior,
    ar1_design,
    gibbs_homoskedastic,
    gibbs_sv_errors,
)
from .model import PriorSpec, ReturnsSeries, SvParameters, logret, svsim
from .predictive import (
    DEFAULT_PRED_QUANTILES,
    MODELS,
    FitConfig,
    cumulative_bayes_factor,
    rolling_evaluation,
)
from .rngtools import make_rng
from .sampler import (
    DEFAULT_QUANTILES,
    SamplerConfig,
    merge_chains,
    predict_volatility,
    svsample,
    svsample_chains,
)

log = logging.getLogger("volatil")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get("VOLATIL_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"VOLATIL_SEED must be an integer, got {env!r}") from None
    # fresh entropy, recorded in the outputs so the run can be repeated
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def _add_sampler_args(p, draws=10000):
    g = p.add_argument_group("sampler")
    g.add_argument("--burnin", type=int, default=1000)
    g.add_argument("--draws", type=int, default=draws)
    g.add_argument("--seed", type=int, default=None,
                   help="RNG seed (falls back to $VOLATIL_SEED, then fresh entropy)")
    g.add_argument("--quiet", action="store_true", help="suppress progress output")


def _add_prior_args(p):
    g = p.add_argument_group("SV prior")
    g.add_argument("--priormu", nargs=2, type=float, default=(0.0, 100.0), metavar=("MEAN", "SD"))
    g.add_argument("--priorphi", nargs=2, type=float, default=(5.0, 1.5), metavar=("A0", "B0"))
    g.add_argument("--priorsigma", type=float, default=1.0, metavar="S")


def _add_regression_prior_args(p):
    g = p.add_argument_group("regression prior")
    g.add_argument("--prior-precision", type=float, default=1e-10,
                   help="B0inv = PRECISION * I, prior mean zero (default %(default)s)")
    g.add_argument("--c0", type=float, default=0.001)
    g.add_argument("--C0", type=float, default=0.001)
    g.add_argument("--garch-scales", nargs=3, type=float, default=(0.1, 0.1, 0.1),
                   metavar=("S0", "S1", "S2"), help="random-walk scales on log alpha")


def _sv_prior(args) -> PriorSpec:
    return PriorSpec.from_cli(tuple(args.priormu), tuple(args.priorphi), args.priorsigma)


def _reg_prior(args, p) -> RegressionPrior:
    return RegressionPrior(np.zeros(p), args.prior_precision * np.eye(p), args.c0, args.C0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volatil", description="Bayesian stochastic volatility toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an SV series")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu", type=float, default=-10.0)
    p.add_argument("--phi", type=float, default=0.98)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", "-o", type=Path, required=True, help="output directory")

    p = sub.add_parser("fit", help="fit the SV model to a returns (or price) series")
    p.add_argument("input", type=Path)
    p.add_argument("--output", "-o", type=Path, required=True)
    p.add_argument("--logret", action="store_true", help="input holds prices; use log returns")
    p.add_argument("--demean", action="store_true", help="subtract the mean return")
    _add_prior_args(p)
    _add_sampler_args(p)
    p.add_argument("--thinpara", type=int, default=1)
    p.add_argument("--thinlatent", type=int, default=1)
    p.add_argument("--thintime", type=int, default=1)
    p.add_argument("--forecast", type=int, default=0, metavar="H", help="forecast horizon")
    p.add_argument("--quantiles", nargs="+", type=float, default=list(DEFAULT_QUANTILES))
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("regress", help="Bayesian linear regression with a chosen error model")
    p.add_argument("input", type=Path,
                   help="CSV with header: response first, regressors after (intercept added)")
    p.add_argument("--output", "-o", type=Path, required=True)
    p.add_argument("--model", choices=MODELS, default="homoskedastic")
    p.add_argument("--ar1", action="store_true",
                   help="input is a single series; regress x_t on (1, x_{t-1})")
    _add_prior_args(p)
    _add_regression_prior_args(p)
    _add_sampler_args(p)
    p.add_argument("--thin", type=int, default=1)

    p = sub.add_parser("evaluate", help="rolling one-step-ahead predictive likelihoods")
    p.add_argument("input", type=Path, help="series CSV")
    p.add_argument("--output", "-o", type=Path, required=True)
    p.add_argument("--model", action="append", dest="models", metavar="MODEL",
                   help=f"one of {', '.join(MODELS)}; repeat for several (default: sv, homoskedastic)")
    p.add_argument("--design", choices=("ar1", "mean"), default="ar1",
                   help="ar1: x_t on (1, x_{t-1}); mean: x_t on a constant")
    p.add_argument("--log-levels", action="store_true", help="take logs of the series first")
    p.add_argument("--training-cutoff", type=int, required=True, metavar="S")
    p.add_argument("--pl-draws", type=int, default=None, metavar="M",
                   help="posterior draws per predictive likelihood (default: all stored)")
    p.add_argument("--threads", type=int, default=1)
    _add_prior_args(p)
    _add_regression_prior_args(p)
    _add_sampler_args(p)
    return parser


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    sim = svsim(args.n, SvParameters(args.mu, args.phi, args.sigma), seed=seed)
    t = np.arange(1, args.n + 1)
    fileio.write_matrix_csv(args.output / "returns.csv", ["t", "value"], t, sim.returns.values)
    fileio.write_matrix_csv(args.output / "latent.csv", ["t", "h"], np.arange(args.n + 1), sim.latent.h)
    fileio.write_json(args.output / "truth.json",
                      {"mu": args.mu, "phi": args.phi, "sigma": args.sigma, "n": args.n, "seed": seed})
    return EXIT_OK


def _load_returns(args) -> ReturnsSeries:
    values, labels = fileio.read_series(args.input)
    if args.logret:
        return logret(values, demean=args.demean, labels=labels)
    if args.demean:
        values = values - values.mean()
    return ReturnsSeries(values, labels)


def cmd_fit(args) -> int:
    y = _load_returns(args)
    seed = _resolve_seed(args.seed)
    prior = _sv_prior(args)
    cfg = SamplerConfig(burnin=args.burnin, draws=args.draws, thinpara=args.thinpara,
                        thinlatent=args.thinlatent, thintime=args.thintime, quiet=args.quiet, seed=seed)
    if args.forecast < 0:
        raise ValidationError("--forecast must be nonnegative")
    if args.chains > 1:
        parts = svsample_chains(y, prior, cfg, args.chains, workers=args.threads)
        d = merge_chains(parts, args.quantiles)
    else:
        parts = None
        d = svsample(y, prior, cfg, quantiles=args.quantiles)

    out = args.output
    fileio.save_sv_draws(out, d)
    s = d.summary
    qs = list(s.quantiles)
    qnames = [f"q{q:g}" for q in qs]
    times = d.latent_times
    labels = [y.labels[t - 1] if y.labels else "" for t in times]
    rows = [(int(t), lab, float(m), float(sd), *map(float, qrow))
            for t, lab, m, sd, qrow in zip(times, labels, s.latent["mean"], s.latent["sd"],
                                           s.latent["quantiles"])]
    fileio.write_csv(out / "volatility.csv", ["t", "label", "mean", "sd", *qnames], rows)

    if args.forecast > 0:
        rng = make_rng(seed)
        if parts is None:
            h = predict_volatility(d, args.forecast, rng)
        else:
            h = np.concatenate([predict_volatility(p, args.forecast, rng) for p in parts])
        vol = 100.0 * np.exp(h / 2.0)
        qv = np.quantile(vol, qs, axis=0).T
        rows = [(k + 1, float(vol[:, k].mean()), *map(float, qv[k])) for k in range(args.forecast)]
        fileio.write_csv(out / "forecast.csv", ["step", "mean", *qnames], rows)

    fileio.write_json(out / "summary.json", {
        "n": len(y),
        "priors": prior.to_dict(),
        "config": {"burnin": cfg.burnin, "draws": cfg.draws, "thinpara": cfg.thinpara,
                   "thinlatent": cfg.thinlatent, "thintime": cfg.thintime, "chains": args.chains,
                   "seed": seed, "logret": args.logret, "demean": args.demean},
        "quantiles": qs,
        "parameters": s.para,
        "runtime": d.runtime,
        "sampler": d.meta.get("sampler"),
        "acceptance": d.meta.get("acceptance"),
        "mixture_checksum": d.meta.get("mixture_checksum"),
    })
    return EXIT_OK


def _summarize_columns(names, mat, quantiles=DEFAULT_QUANTILES):
    out = {}
    for j, name in enumerate(names):
        x = mat[:, j]
        out[name] = {"mean": float(x.mean()), "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
                     "quantiles": dict(zip(map(str, quantiles), map(float, np.quantile(x, quantiles))))}
    return out


def _load_design(args) -> RegressionData:
    if args.ar1:
        values, _ = fileio.read_series(args.input)
        return ar1_design(values)
    names, mat = fileio.read_table(args.input)
    if mat.shape[1] < 1:
        raise ValidationError("regression input needs a response column")
    X = np.column_stack([np.ones(mat.shape[0]), mat[:, 1:]])
    return RegressionData(mat[:, 0], X)


def cmd_regress(args) -> int:
    data = _load_design(args)
    seed = _resolve_seed(args.seed)
    rng = make_rng(seed)
    prior = _reg_prior(args, data.p)
    extra = {}
    if args.model == "homoskedastic":
        draws = gibbs_homoskedastic(data, prior, args.burnin, args.draws, rng, thin=args.thin)
    elif args.model == "sv":
        cfg = SamplerConfig(burnin=args.burnin, draws=args.draws, thinpara=args.thin,
                            thinlatent=args.thin, quiet=True, seed=seed)
        draws = gibbs_sv_errors(data, prior, _sv_prior(args), cfg, rng)
    else:
        draws = garch_rwmh(data, prior, args.draws, args.burnin, args.garch_scales, rng, thin=args.thin)
        extra["acceptance"] = draws.acceptance
    fileio.save_regression_draws(args.output / "draws.csv", draws)
    cols = [c for c in draws.columns() if not c.startswith("h_")]
    mat = draws.matrix()[:, :len(cols)]
    fileio.write_json(args.output / "summary.json", {
        "model": args.model, "n": data.n, "p": data.p, "seed": seed,
        "burnin": args.burnin, "draws": args.draws, "thin": args.thin,
        "parameters": _summarize_columns(cols, mat), **extra,
    })
    return EXIT_OK


def cmd_evaluate(args) -> int:
    models = args.models or ["sv", "homoskedastic"]
    for m in models:
        if m not in MODELS:
            raise ValidationError(f"unknown model {m!r}; expected one of {', '.join(MODELS)}")
    values, _ = fileio.read_series(args.input)
    if args.log_levels:
        if np.any(values <= 0):
            raise ValidationError("--log-levels needs a strictly positive series")
        values = np.log(values)
    if args.design == "ar1":
        data = ar1_design(values)
    else:
        data = RegressionData(values, np.ones((values.size, 1)))
    seed = _resolve_seed(args.seed)
    cfg = FitConfig(burnin=args.burnin, draws=args.draws, reg_prior=_reg_prior(args, data.p),
                    sv_prior=_sv_prior(args), garch_scales=tuple(args.garch_scales))
    if not args.quiet:
        print(f"Evaluating {', '.join(models)} on t = {args.training_cutoff + 1}..{data.n} "
              f"with {args.threads} worker(s).", file=sys.stderr)
    res = rolling_evaluation(data, args.training_cutoff, models, cfg, M=args.pl_draws,
                             parallelism=args.threads, seed=seed)
    qs = list(DEFAULT_PRED_QUANTILES)
    rows = [(r.model_tag, r.t, r.log_pl, *(r.pred_quantiles[q] for q in qs))
            for m in models for r in res.records[m]]
    fileio.write_csv(args.output / "predictive.csv", ["model", "t", "log_pl", *[f"q{q:g}" for q in qs]], rows)

    finals = {}
    if len(models) > 1 and not res.failures:
        base = models[0]
        paths = {}
        for other in models[1:]:
            bf = cumulative_bayes_factor(res.records[base], res.records[other], args.training_cutoff)
            paths[f"{base}_vs_{other}"] = bf
            finals[f"{base}_vs_{other}"] = bf.final
        times = next(iter(paths.values())).times
        cols = np.column_stack([b.cumulative for b in paths.values()])
        fileio.write_matrix_csv(args.output / "bayes_factor.csv", ["t", *paths], times, cols)
    elif len(models) > 1:
        log.warning("some refits failed; cumulative Bayes factors are not written")

    fileio.write_json(args.output / "manifest.json", {
        "models": models, "training_cutoff": args.training_cutoff, "n": data.n,
        "design": args.design, "log_levels": args.log_levels, "seed": seed,
        "pl_draws": args.pl_draws, "threads": args.threads, "fit_config": cfg.to_dict(),
        "log_marginal_predictive": {m: float(sum(r.log_pl for r in res.records[m])) for m in models},
        "final_log_bayes_factor": finals,
        "failures": [{"model": f.model_tag, "t": f.t, "error": f.error} for f in res.failures],
    })
    for name, v in finals.items():
        print(f"final cumulative log predictive Bayes factor {name}: {v:.6g}")
    for f in res.failures:
        log.error("fit failed for %s at t=%d: %s", f.model_tag, f.t, f.error)
    return EXIT_RUNTIME if res.failures else EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "regress": cmd_regress, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (SamplerError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("sampler failure: %s", exc)
        return EXIT_RUNTIME
    except Exception:
        log.exception("internal error")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
