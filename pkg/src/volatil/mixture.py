"""Auxiliary mixture linearization of the SV observation equation.

Squaring and logging the returns gives ystar_t = h_t + log(eps_t^2) with
log(eps_t^2) ~ log chi^2_1, which is approximated by a finite normal mixture.
Conditional on the component indicators the model is linear and Gaussian.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.special import digamma

from . import kernels
from .errors import SamplerError, ValidationError
from .model import LatentPath, ReturnsSeries
from .rngtools import uniforms

LOGCHISQ1_MEAN = float(digamma(0.5) + math.log(2.0))
LOGCHISQ1_VAR = math.pi ** 2 / 2.0


class ZeroReturnsWarning(UserWarning):
    """Zero returns were found; an offset was added before log-squaring."""


@dataclass(frozen=True, eq=False)
class MixtureTable:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    checksum: str = ""
    min_components: int = 7

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        m = np.asarray(self.means, dtype=float).ravel()
        v = np.asarray(self.variances, dtype=float).ravel()
        if not (w.size == m.size == v.size):
            raise ValidationError("mixture columns must have equal length")
        if w.size < self.min_components:
            raise ValidationError(f"mixture needs at least {self.min_components} components, got {w.size}")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"mixture weights must be positive and sum to 1 (sum={w.sum()!r})")
        if np.any(v <= 0) or not np.all(np.isfinite(m)):
            raise ValidationError("mixture variances must be positive and means finite")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        # constants reused by the indicator kernel
        object.__setattr__(self, "inv_var", 1.0 / v)
        object.__setattr__(self, "log_coef", np.log(w) - 0.5 * np.log(v))

    @property
    def K(self) -> int:
        return self.weights.size

    def mean(self) -> float:
        return float(self.weights @ self.means)

    def variance(self) -> float:
        mu = self.mean()
        return float(self.weights @ (self.variances + self.means ** 2) - mu * mu)

    @classmethod
    def parse(cls, text: str, **kwargs) -> "MixtureTable":
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValidationError(f"mixture table line {lineno}: expected 'weight mean variance'")
            rows.append([float(x) for x in parts])
        arr = np.array(rows, dtype=float).reshape(-1, 3)
        checksum = hashlib.sha256(text.encode()).hexdigest()
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], checksum=checksum, **kwargs)

    @classmethod
    def from_file(cls, path) -> "MixtureTable":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


@lru_cache(maxsize=1)
def default_table() -> MixtureTable:
    """The shipped 10-component table."""
    text = resources.files("volatil").joinpath("data/omori10.txt").read_text(encoding="utf-8")
    return MixtureTable.parse(text)


def mixture_fidelity(table: MixtureTable | None = None) -> tuple[float, float]:
    """Absolute errors of the mixture mean and variance against log chi^2_1."""
    table = default_table() if table is None else table
    return abs(table.mean() - LOGCHISQ1_MEAN), abs(table.variance() - LOGCHISQ1_VAR)


@dataclass(frozen=True)
class LinearizedData:
    ystar: np.ndarray
    offset: float


def linearize(y) -> LinearizedData:
    """ystar_t = log(y_t^2 + c) with c = sd(y)/10000 only if some y_t is exactly zero."""
    values = y.values if isinstance(y, ReturnsSeries) else np.asarray(y, dtype=float)
    c = 0.0
    if np.any(values == 0.0):
        c = float(np.std(values, ddof=1)) / 10000.0
        warnings.warn(f"returns contain zeros; adding offset {c:.3g} to squared returns",
                      ZeroReturnsWarning, stacklevel=2)
    with np.errstate(divide="ignore"):
        ystar = np.log(values * values + c)
    if not np.all(np.isfinite(ystar)):
        raise ValidationError("all returns are zero; cannot linearize")
    return LinearizedData(ystar, c)


def indicator_probabilities(resid, table: MixtureTable) -> np.ndarray:
    """Normalized component probabilities for residuals ystar_t - h_t (rows sum to 1)."""
    resid = np.asarray(resid, dtype=float)
    lp = table.log_coef - 0.5 * (resid[:, None] - table.means) ** 2 * table.inv_var
    p = np.exp(lp - lp.max(axis=1, keepdims=True))
    return p / p.sum(axis=1, keepdims=True)


def sample_indicators(ystar, h, table: MixtureTable, rng) -> np.ndarray:
    """Draw r_t with P(r_t = j) proportional to w_j N(ystar_t - h_t; m_j, v_j).

    ``ystar`` may be LinearizedData or an array of length n; ``h`` a LatentPath or
    array of length n + 1 (h_0 is ignored).
    """
    ys = ystar.ystar if isinstance(ystar, LinearizedData) else ystar
    hh = h.h if isinstance(h, LatentPath) else h
    if hh.size != ys.size + 1:
        raise ValidationError(f"latent path length {hh.size} does not match data length {ys.size} + 1")
    resid = np.ascontiguousarray(ys - hh[1:])
    if not np.all(np.isfinite(resid)):
        raise SamplerError("non-finite residual in indicator sampling")
    u = uniforms(rng, ys.size)
    return kernels.sample_indicators(resid, table.log_coef, table.means, table.inv_var, u)
