"""Bayesian stochastic volatility: efficient MCMC, SV-error regression and
predictive model comparison."""

from .errors import SamplerError, ValidationError
from .garch import GarchParams, garch_recursion, garch_rwmh
from .linreg import (
    RegressionData,
    RegressionPrior,
    gibbs_homoskedastic,
    gibbs_sv_errors,
    log_marginal_likelihood_conjugate,
)
from .mixture import MixtureTable, default_table, linearize, sample_indicators
from .model import (
    LatentPath,
    PriorSpec,
    ReturnsSeries,
    SvParameters,
    logret,
    prior_phi_moments,
    svsim,
)
from .predictive import (
    FitConfig,
    cumulative_bayes_factor,
    log_marginal_likelihood,
    predictive_step,
    rolling_evaluation,
)
from .sampler import (
    SamplerConfig,
    SvDraws,
    predict_volatility,
    residuals,
    sv_update_step,
    svsample,
    updatesummary,
)
from .theta import ThetaUpdateConfig, asis_step

__version__ = "0.1.0"

__all__ = [
    "FitConfig", "GarchParams", "LatentPath", "MixtureTable", "PriorSpec", "RegressionData",
    "RegressionPrior", "ReturnsSeries", "SamplerConfig", "SamplerError", "SvDraws", "SvParameters",
    "ThetaUpdateConfig", "ValidationError", "asis_step", "cumulative_bayes_factor", "default_table",
    "garch_recursion", "garch_rwmh", "gibbs_homoskedastic", "gibbs_sv_errors", "linearize",
    "log_marginal_likelihood", "log_marginal_likelihood_conjugate", "logret", "predict_volatility",
    "predictive_step", "prior_phi_moments", "residuals", "rolling_evaluation", "sample_indicators",
    "sv_update_step", "svsample", "svsim", "updatesummary",
]
