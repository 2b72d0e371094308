import math

import numpy as np
import pytest
from scipy import stats

from conftest import geweke_statistics

from volatil.diagnostics import mc_standard_error
from volatil.errors import ValidationError
from volatil.linreg import (
    HomoskedasticKernel,
    RegressionData,
    RegressionPrior,
    ar1_design,
    beta_step_weighted,
    gibbs_homoskedastic,
    gibbs_sv_errors,
    log_marginal_likelihood_conjugate,
    sample_prior_homoskedastic,
    sample_prior_sv_regression,
)
from volatil.model import PriorSpec
from volatil.rngtools import make_rng, normals
from volatil.sampler import SamplerConfig


def _design(n, seed, sd=1.0):
    rng = make_rng(seed)
    return np.column_stack([np.ones(n), sd * normals(rng, n)])


class TestData:
    def test_first_column_ones(self):
        with pytest.raises(ValidationError, match="ones"):
            RegressionData([1.0, 2.0], np.array([[1.0, 0.0], [2.0, 1.0]]))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            RegressionData([1.0, 2.0, 3.0], np.ones((2, 1)))

    def test_missing_values(self):
        with pytest.raises(ValidationError):
            RegressionData([1.0, np.nan], np.ones((2, 1)))

    def test_rank(self):
        X = np.column_stack([np.ones(5), np.arange(5.0), 2 * np.arange(5.0)])
        assert RegressionData(np.zeros(5), X).rank() == 2

    def test_rank_deficient_with_flat_prior(self):
        X = np.column_stack([np.ones(5), np.ones(5)])
        data = RegressionData(np.arange(5.0), X)
        with pytest.raises(ValidationError, match="rank deficient"):
            gibbs_homoskedastic(data, RegressionPrior(np.zeros(2), np.zeros((2, 2))), 0, 10, make_rng(1))

    def test_prior_validation(self):
        with pytest.raises(ValidationError):
            RegressionPrior(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValidationError):
            RegressionPrior(np.zeros(2), np.eye(2), c0=0.0)

    def test_ar1_design(self):
        d = ar1_design([1.0, 2.0, 4.0])
        assert d.y.tolist() == [2.0, 4.0] and d.X.tolist() == [[1.0, 1.0], [1.0, 2.0]]


class TestHomoskedastic:
    def test_flat_prior_gives_ols(self):
        X = _design(500, 1)
        y = X @ [0.3, -1.2] + 0.5 * normals(make_rng(2), 500)
        d = gibbs_homoskedastic(RegressionData(y, X), RegressionPrior(np.zeros(2), np.zeros((2, 2))),
                                100, 4000, make_rng(3))
        ols = np.linalg.lstsq(X, y, rcond=None)[0]
        assert np.all(np.abs(d.beta.mean(axis=0) - ols) < 4 * mc_standard_error(d.beta))
        assert np.all(d.sigma > 0)

    def test_conjugate_closed_form_single_observation(self):
        # p = 1, y = (2): posterior of sigma^2 is InvGamma(c0 + 1/2, C*), beta | sigma^2 normal
        c0, C0, b0, B0inv = 40.0, 40.0, 0.5, 2.0
        data = RegressionData([2.0], np.ones((1, 1)))
        prior = RegressionPrior([b0], [[B0inv]], c0, C0)
        d = gibbs_homoskedastic(data, prior, 200, 60000, make_rng(5))
        P = 1.0 + B0inv
        bT = (2.0 + B0inv * b0) / P
        c = c0 + 0.5
        C = C0 + 0.5 * (4.0 + B0inv * b0 ** 2 - P * bT ** 2)
        s2 = d.sigma ** 2
        assert s2.mean() == pytest.approx(C / (c - 1), rel=0.01)
        assert d.beta[:, 0].mean() == pytest.approx(bT, abs=4 * math.sqrt(C / (c - 1) / P / 60000))
        assert d.beta[:, 0].var() == pytest.approx(C / (c - 1) / P, rel=0.03)

    def test_dominant_prior(self):
        X = _design(50, 4)
        y = X @ [5.0, 5.0] + normals(make_rng(1), 50)
        prior = RegressionPrior([1.0, -2.0], 1e12 * np.eye(2), 1.0, 1.0)
        d = gibbs_homoskedastic(RegressionData(y, X), prior, 10, 500, make_rng(2))
        assert np.allclose(d.beta.mean(axis=0), [1.0, -2.0], atol=1e-3)

    def test_thinning(self):
        X = _design(20, 1)
        d = gibbs_homoskedastic(RegressionData(normals(make_rng(1), 20), X), RegressionPrior.vague(2),
                                0, 100, make_rng(1), thin=7)
        assert d.beta.shape == (14, 2)
        assert d.columns() == ["beta_0", "beta_1", "sigma"]

    def test_geweke_small(self):
        X = _design(8, 6)
        prior = RegressionPrior([0.5, -0.5], np.eye(2), 6.0, 5.0)
        z = geweke_statistics(HomoskedasticKernel(X, prior).step, X, prior, 20000, make_rng(7))
        assert np.all(np.abs(z) < stats.norm.ppf(1 - 0.005)), z

    def test_geweke_detects_a_broken_kernel(self):
        # dropping the p/2 term in the shape c_n must be caught
        X = _design(8, 6)
        prior = RegressionPrior([0.5, -0.5], np.eye(2), 6.0, 5.0)
        k = HomoskedasticKernel(X, prior)
        k.c_n -= 1.0
        z = geweke_statistics(k.step, X, prior, 20000, make_rng(7))
        assert np.any(np.abs(z) > stats.norm.ppf(1 - 0.005))


class TestMarginalLikelihood:
    def test_against_multivariate_t(self):
        X = _design(12, 3)
        y = X @ [1.0, 0.5] + normals(make_rng(4), 12)
        prior = RegressionPrior([0.2, 0.1], np.array([[2.0, 0.3], [0.3, 0.5]]), 3.0, 2.0)
        shape = prior.C0 / prior.c0 * (np.eye(12) + X @ np.linalg.inv(prior.B0inv) @ X.T)
        ref = stats.multivariate_t(X @ prior.b0, shape, df=2 * prior.c0).logpdf(y)
        assert log_marginal_likelihood_conjugate(RegressionData(y, X), prior) == pytest.approx(ref, rel=1e-10)

    def test_empty_data_is_zero(self):
        data = RegressionData(np.zeros(0), np.ones((0, 2)))
        assert log_marginal_likelihood_conjugate(data, RegressionPrior(np.zeros(2), np.eye(2), 2, 2)) == pytest.approx(0.0, abs=1e-12)

    def test_prior_sampler_moments(self):
        prior = RegressionPrior([1.0, -1.0], np.diag([4.0, 1.0]), 5.0, 8.0)
        d = sample_prior_homoskedastic(prior, 100_000, make_rng(9))
        assert (d.sigma ** 2).mean() == pytest.approx(8.0 / 4.0, rel=0.02)
        assert np.allclose(d.beta.mean(axis=0), [1.0, -1.0], atol=0.02)
        # Var(beta_j) = E(sigma^2) * B0_jj
        assert np.allclose(d.beta.var(axis=0), [2.0 / 4.0, 2.0], rtol=0.04)


class TestSvErrors:
    def test_constant_h_reduces_to_weighted_normal(self):
        X = _design(30, 2)
        y = X @ [1.0, 2.0] + 0.3 * normals(make_rng(3), 30)
        c = math.log(0.09)
        flat = RegressionPrior(np.zeros(2), np.zeros((2, 2)))
        z = np.array([0.4, -1.1])
        beta = beta_step_weighted(X, y, np.full(30, c), flat, None, z=z)
        # homoskedastic conditional with sigma^2 = e^c and a flat prior
        kernel = HomoskedasticKernel(X, flat)
        bT = kernel.posterior_mean(y)
        ref = bT + math.sqrt(math.exp(c)) * np.linalg.solve(kernel.L.T, z)
        assert np.allclose(beta, ref, rtol=1e-12)

    def test_weighted_step_includes_prior_mean(self):
        X = _design(10, 2)
        y = normals(make_rng(3), 10)
        h = normals(make_rng(4), 10)
        prior = RegressionPrior([3.0, -2.0], np.diag([5.0, 0.5]), 1.0, 1.0)
        w = np.exp(-h)
        P = X.T @ (w[:, None] * X) + prior.B0inv
        mean = np.linalg.solve(P, X.T @ (w * y) + prior.B0inv @ prior.b0)
        assert np.allclose(beta_step_weighted(X, y, h, prior, None, z=np.zeros(2)), mean, rtol=1e-12)

    def test_dominant_prior(self):
        X = _design(100, 5, sd=0.01)
        y = X @ [0.1, 0.5] + 0.01 * normals(make_rng(6), 100)
        prior = RegressionPrior([1.0, 1.0], 1e14 * np.eye(2))
        d = gibbs_sv_errors(RegressionData(y, X), prior, PriorSpec(),
                            SamplerConfig(burnin=20, draws=100, quiet=True, seed=1))
        assert np.allclose(d.beta, [1.0, 1.0], atol=1e-5)

    def test_near_homoskedastic_limit(self):
        n = 300
        X = _design(n, 7)
        y = X @ [0.1, 0.5] + 0.1 * normals(make_rng(8), n)
        data = RegressionData(y, X)
        prior = RegressionPrior.vague(2)
        hom = gibbs_homoskedastic(data, prior, 200, 4000, make_rng(1))
        sv_prior = PriorSpec(b_mu=0.0, B_mu=100.0, a0=2000.0, b0=2000.0, B_sigma=1e-6)
        sv = gibbs_sv_errors(data, prior, sv_prior, SamplerConfig(burnin=300, draws=4000, quiet=True, seed=2))
        ks = stats.ks_2samp(hom.beta[:, 1], sv.beta[:, 1]).statistic
        assert ks < 0.1
        assert np.all(np.exp(sv.latent / 2) > 0)

    def test_shapes_and_names(self):
        X = _design(40, 1)
        y = normals(make_rng(2), 40)
        d = gibbs_sv_errors(RegressionData(y, X), RegressionPrior.vague(2), PriorSpec(),
                            SamplerConfig(burnin=5, draws=20, thinpara=2, thinlatent=5, quiet=True, seed=1))
        assert d.beta.shape == (10, 2) and d.para.shape == (10, 3)
        assert d.latent.shape == (4, 40) and d.latent0.shape == (4,)
        assert d.columns()[:5] == ["mu", "phi", "sigma", "beta_0", "beta_1"]

    def test_prior_draws(self):
        sv_prior = PriorSpec(b_mu=-9, B_mu=1.0, a0=20, b0=1.5, B_sigma=0.1)
        d = sample_prior_sv_regression(RegressionPrior(np.zeros(2), np.eye(2)), sv_prior, 50000, make_rng(3))
        assert d.para[:, 0].mean() == pytest.approx(-9, abs=0.03)
        assert d.para[:, 1].mean() == pytest.approx(2 * 20 / 21.5 - 1, abs=0.005)
        assert np.all(d.para[:, 2] > 0) and d.latent.shape == (50000, 1)
