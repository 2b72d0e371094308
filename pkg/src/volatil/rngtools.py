"""Random-number helpers.

Every sampler in the package draws from a ``numpy.random.Generator`` (PCG64 by
default, a seedable 64-bit generator). Standard normals are produced by the
inverse-CDF transform of open-interval uniforms so that the mapping from the
uniform stream to normal variates is fully documented and backend independent.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

_HALF_ULP = 2.0 ** -54


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def uniforms(rng: np.random.Generator, size=None):
    """Uniform draws on the open interval (0, 1)."""
    return rng.random(size) + _HALF_ULP


def normals(rng: np.random.Generator, size=None):
    """Standard normal draws via the inverse normal CDF."""
    return ndtri(uniforms(rng, size))


def task_seed(seed: int, *key) -> int:
    """Derive a 64-bit seed as ``seed XOR hash(key)`` with a stable hash."""
    digest = hashlib.blake2b(":".join(map(str, key)).encode(), digest_size=8).digest()
    return (int(seed) ^ int.from_bytes(digest, "little")) & 0xFFFFFFFFFFFFFFFF
