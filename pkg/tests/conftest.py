import math

import numpy as np
import pytest

from volatil.kernels import available_backends, get_backend
from volatil.diagnostics import ess_batch_means
from volatil.rngtools import make_rng, normals

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return make_rng(20240611)


@pytest.fixture(params=available_backends())
def backend(request):
    return get_backend(request.param)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def assert_within_se(est, truth, se, k=4.0, what=""):
    est, truth, se = map(np.asarray, (est, truth, se))
    z = np.abs(est - truth) / se
    assert np.all(z <= k), f"{what}: |est - truth| / se = {z}"


def geweke_statistics(step, X, prior, m, rng):
    """z-scores comparing marginal-conditional and successive-conditional simulators.

    ``step(y, sigma2, rng)`` is one Gibbs sweep returning (beta, sigma2).
    """
    n, p = X.shape
    L0 = np.linalg.cholesky(prior.B0inv)

    def g(beta, s2):
        return np.array([beta[0], beta[1], s2, beta[0] ** 2, beta[0] * beta[1], s2 * beta[1] ** 2])

    def draw_prior():
        s2 = prior.C0 / rng.gamma(prior.c0)
        beta = prior.b0 + math.sqrt(s2) * np.linalg.solve(L0.T, normals(rng, p))
        return beta, s2

    mc = np.array([g(*draw_prior()) for _ in range(m)])
    beta, s2 = draw_prior()
    sc = np.empty_like(mc)
    for i in range(m):
        y = X @ beta + math.sqrt(s2) * normals(rng, n)
        beta, s2 = step(y, s2, rng)
        sc[i] = g(beta, s2)
    se = np.sqrt(mc.var(axis=0, ddof=1) / m + sc.var(axis=0, ddof=1) / ess_batch_means(sc))
    return (mc.mean(axis=0) - sc.mean(axis=0)) / se
