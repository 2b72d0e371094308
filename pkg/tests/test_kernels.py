import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volatil import kernels
from volatil.kernels import available_backends, get_backend
from volatil.rngtools import make_rng


def test_python_backend_always_available():
    assert "python" in available_backends()
    assert kernels.BACKEND in available_backends()


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("fortran")


def test_env_var_forces_fallback():
    code = "from volatil import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, VOLATIL_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def _tridiag_case(n, seed):
    rng = make_rng(seed)
    off = rng.normal(size=n - 1)
    # diagonal dominance keeps the matrix positive definite
    diag = np.abs(np.r_[off, 0.0]) + np.abs(np.r_[0.0, off]) + rng.uniform(0.1, 2.0, n)
    return diag, off, rng.normal(size=n), rng.normal(size=n)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2 ** 31))
def test_tridiag_backends_agree(n, seed):
    args = _tridiag_case(n, seed)
    outs = [get_backend(b).tridiag_sample(*args) for b in available_backends()]
    for o in outs[1:]:
        assert np.allclose(o, outs[0], rtol=1e-11, atol=1e-12)


def test_tridiag_against_dense(backend):
    diag, off, cov, z = _tridiag_case(25, 3)
    A = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    L = np.linalg.cholesky(A)
    ref = np.linalg.solve(A, cov) + np.linalg.solve(L.T, z)
    assert np.allclose(backend.tridiag_sample(diag, off, cov, z), ref, rtol=1e-10, atol=1e-12)


def test_tridiag_single_element(backend):
    out = backend.tridiag_sample(np.array([4.0]), np.array([]), np.array([2.0]), np.array([1.0]))
    assert out[0] == pytest.approx(0.5 + 0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.floats(1e-8, 1.0), st.floats(0, 0.5), st.floats(0, 0.95),
       st.integers(0, 2 ** 31))
def test_garch_backends_agree_and_positive(n, a0, a1, a2, seed):
    y = make_rng(seed).normal(0, 1, n)
    outs = [get_backend(b).garch_variance(y, a0, a1, a2, 0.7, 0.0) for b in available_backends()]
    for o in outs:
        assert np.all(o > 0)
    for o in outs[1:]:
        assert np.allclose(o, outs[0], rtol=1e-12)


def test_garch_variance_loop(backend):
    y = np.array([0.3, -1.2, 0.5])
    a0, a1, a2, s0, y0 = 0.1, 0.2, 0.6, 1.5, 0.4
    ref, s, prev = [], s0, y0
    for v in y:
        s = a0 + a1 * prev ** 2 + a2 * s
        ref.append(s)
        prev = v
    assert np.allclose(backend.garch_variance(y, a0, a1, a2, s0, y0), ref, rtol=1e-14)
