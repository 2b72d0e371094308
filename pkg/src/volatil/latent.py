"""Joint ("all without a loop") draw of h_0..h_n given indicators and parameters.

Conditional on the mixture indicators the log-variances are jointly Gaussian
with a tridiagonal precision matrix, so one banded Cholesky factorization gives
an exact draw in O(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SamplerError
from .mixture import LinearizedData, MixtureTable
from .model import LatentPath, SvParameters
from .rngtools import normals


@dataclass(frozen=True)
class TridiagonalSystem:
    """Precision diagonal/off-diagonal and the canonical mean vector (covector)."""

    diag: np.ndarray
    offdiag: np.ndarray
    covector: np.ndarray

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def build_system(ystar, r, params: SvParameters, table: MixtureTable) -> TridiagonalSystem:
    ys = ystar.ystar if isinstance(ystar, LinearizedData) else np.asarray(ystar, dtype=float)
    n = ys.size
    mu, phi, sigma = params.mu, params.phi, params.sigma
    s2inv = 1.0 / (sigma * sigma)
    inv_v = table.inv_var[r]

    diag = np.empty(n + 1)
    diag[0] = s2inv
    diag[1:n] = inv_v[:-1] + (1.0 + phi * phi) * s2inv
    diag[n] = inv_v[-1] + s2inv
    off = np.full(n, -phi * s2inv)

    cov = np.empty(n + 1)
    cov[0] = mu * (1.0 - phi) * s2inv
    cov[1:] = (ys - table.means[r]) * inv_v
    cov[1:n] += mu * (1.0 - phi) ** 2 * s2inv
    cov[n] += mu * (1.0 - phi) * s2inv

    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(cov)) and np.all(np.isfinite(off))):
        raise SamplerError(
            f"non-finite precision entries (mu={mu}, phi={phi}, sigma={sigma}, "
            f"diag range [{np.nanmin(diag)}, {np.nanmax(diag)}])")
    return TridiagonalSystem(diag, off, cov)


def sample_latent(system: TridiagonalSystem, rng=None, z=None) -> LatentPath:
    """Exact draw from N(Omega^{-1} covector, Omega^{-1}).

    Passing ``z = 0`` returns the conditional mean.
    """
    if z is None:
        z = normals(rng, system.diag.size)
    z = np.ascontiguousarray(z, dtype=float)
    h = kernels.tridiag_sample(system.diag, system.offdiag, system.covector, z)
    return LatentPath(h)


def conditional_mean(system: TridiagonalSystem) -> np.ndarray:
    return sample_latent(system, z=np.zeros(system.diag.size)).h
