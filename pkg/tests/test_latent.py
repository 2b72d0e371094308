import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volatil.errors import SamplerError
from volatil.latent import TridiagonalSystem, build_system, conditional_mean, sample_latent
from volatil.mixture import default_table
from volatil.model import SvParameters, latent_logdensity
from volatil.rngtools import make_rng


def _log_joint(h, ystar, r, params, table):
    """log p(h) + sum_t log N(ystar_t; h_t + m_{r_t}, v_{r_t}), quadratic in h."""
    m, v = table.means[r], table.variances[r]
    obs = -0.5 * ((ystar - m - h[1:]) ** 2 / v).sum()
    return latent_logdensity(h, params.mu, params.phi, params.sigma) + obs


def _random_case(seed, n=8):
    rng = make_rng(seed)
    table = default_table()
    params = SvParameters(rng.normal(-5, 2), rng.uniform(-0.95, 0.99), rng.uniform(0.05, 1.0))
    ystar = rng.normal(-6, 3, n)
    r = rng.integers(0, table.K, n)
    return ystar, r, params, table


def _numeric_precision_and_covector(f, dim):
    # exact for a quadratic up to rounding: central differences with unit steps
    e = np.eye(dim)
    grad = np.array([(f(e[i]) - f(-e[i])) / 2 for i in range(dim)])
    hess = np.empty((dim, dim))
    for i in range(dim):
        for j in range(dim):
            hess[i, j] = (f(e[i] + e[j]) - f(e[i] - e[j]) - f(-e[i] + e[j]) + f(-e[i] - e[j])) / 4
    return -hess, grad


@pytest.mark.parametrize("seed", range(5))
def test_precision_and_covector_match_differentiated_density(seed):
    ystar, r, params, table = _random_case(seed)
    sys_ = build_system(ystar, r, params, table)
    P, c = _numeric_precision_and_covector(lambda h: _log_joint(h, ystar, r, params, table), ystar.size + 1)
    scale = np.abs(P).max()
    assert np.allclose(sys_.dense(), P, atol=1e-7 * scale)
    assert np.allclose(sys_.covector, c, atol=1e-7 * max(1.0, np.abs(c).max()))


@pytest.mark.parametrize("seed", range(5))
def test_conditional_mean_matches_dense_solve(seed):
    ystar, r, params, table = _random_case(seed, n=30)
    s = build_system(ystar, r, params, table)
    ref = np.linalg.solve(s.dense(), s.covector)
    assert np.allclose(conditional_mean(s), ref, rtol=1e-10, atol=1e-10)


def test_fixed_noise_matches_dense_cholesky():
    ystar, r, params, table = _random_case(11, n=20)
    s = build_system(ystar, r, params, table)
    z = make_rng(3).normal(size=s.diag.size)
    L = np.linalg.cholesky(s.dense())
    ref = np.linalg.solve(s.dense(), s.covector) + np.linalg.solve(L.T, z)
    assert np.allclose(sample_latent(s, z=z).h, ref, rtol=1e-10, atol=1e-10)


def test_sample_moments_small_system():
    ystar, r, params, table = _random_case(2, n=4)
    s = build_system(ystar, r, params, table)
    rng = make_rng(8)
    draws = np.array([sample_latent(s, rng).h for _ in range(20000)])
    cov = np.linalg.inv(s.dense())
    mean = cov @ s.covector
    se = np.sqrt(np.diag(cov) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4.5 * se)
    assert np.allclose(np.cov(draws.T), cov, atol=0.05 * np.abs(cov).max())


def test_non_positive_definite_is_reported(backend):
    diag = np.array([1.0, -2.0, 1.0])
    with pytest.raises(SamplerError, match="positive definite"):
        backend.tridiag_sample(diag, np.array([0.1, 0.1]), np.zeros(3), np.zeros(3))


def test_non_finite_parameters_are_reported():
    table = default_table()
    with pytest.raises(SamplerError, match="non-finite"):
        build_system(np.array([np.inf, 0.0]), np.array([0, 1]), SvParameters(0, 0.5, 0.1), table)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.floats(-0.99, 0.99), st.floats(0.05, 2.0), st.integers(0, 2 ** 31))
def test_solve_property(n, phi, sigma, seed):
    rng = make_rng(seed)
    table = default_table()
    params = SvParameters(rng.normal(), phi, sigma)
    s = build_system(rng.normal(-5, 3, n), rng.integers(0, table.K, n), params, table)
    h = conditional_mean(s)
    # conditional mean solves Omega h = covector
    assert np.allclose(s.dense() @ h, s.covector, rtol=1e-8, atol=1e-8 * np.abs(s.covector).max())


def test_system_is_symmetric_tridiagonal():
    ystar, r, params, table = _random_case(4, n=10)
    s = build_system(ystar, r, params, table)
    D = s.dense()
    assert isinstance(s, TridiagonalSystem)
    assert np.array_equal(D, D.T)
    assert np.count_nonzero(np.triu(D, 2)) == 0
