"""Ordinal probit likelihood with stable tail arithmetic.

A sample with score f and label y has probability
psi((b_y - f)/sigma) - psi((b_{y-1} - f)/sigma), where psi is the standard
normal CDF and b_0 = -inf, b_r = +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import InputError, NumericError

H_MIN = 1e-10
LOG_FLOOR = math.log(1e-300)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Thresholds:
    """Ascending cut-points parameterized as b1 plus positive gaps.

    ``deltas[k]`` is the gap between b_{k+1} and b_{k+2}, so a model with r
    categories carries r - 2 gaps.
    """

    b1: float
    deltas: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float).ravel()
        if not np.isfinite(self.b1):
            raise InputError("b1 must be finite")
        if d.size and not (np.all(np.isfinite(d)) and np.all(d > 0)):
            raise InputError("threshold gaps must be finite and positive")
        object.__setattr__(self, "b1", float(self.b1))
        object.__setattr__(self, "deltas", d)

    @property
    def r(self) -> int:
        return self.deltas.size + 2

    def cutpoints(self) -> np.ndarray:
        """b_1 .. b_{r-1}."""
        return self.b1 + np.concatenate(([0.0], np.cumsum(self.deltas)))

    def edges(self) -> np.ndarray:
        """b_0 .. b_r including the infinite ends."""
        return np.concatenate(([-np.inf], self.cutpoints(), [np.inf]))

    @classmethod
    def initial(cls, r: int) -> "Thresholds":
        """Unit-spaced cut-points centred on zero: b_i = i - r/2."""
        if r < 2:
            raise InputError("need at least two categories")
        return cls(1.0 - r / 2.0, np.ones(r - 2))

    @classmethod
    def from_cutpoints(cls, cuts) -> "Thresholds":
        cuts = np.asarray(cuts, dtype=float).ravel()
        if cuts.size < 1:
            raise InputError("need at least one cut-point")
        return cls(cuts[0], np.diff(cuts))


@dataclass(frozen=True)
class LikelihoodTerms:
    log_lik: float
    delta: np.ndarray
    hess_diag: np.ndarray
    # N(z1)/(psi(z1) - psi(z2)) per sample; feeds the threshold-gap gradient
    upper_ratio: np.ndarray


def normal_cdf(z):
    return ndtr(z)


def _log_pdf(z):
    with np.errstate(over="ignore", invalid="ignore"):
        return -0.5 * np.square(z) - _LOG_SQRT_2PI


def log_mass(z1, z2):
    """Vectorized log(psi(z1) - psi(z2)) for z1 > z2, infinities allowed.

    When both arguments sit in the upper tail the difference is taken
    between survival functions, so the lower-tail log-CDF does the work in
    both branches.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    upper = z2 > 0
    hi = np.where(upper, -z2, z1)
    lo = np.where(upper, -z1, z2)
    lhi = log_ndtr(hi)
    llo = log_ndtr(lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lhi + np.log1p(-np.exp(llo - lhi))
    bad = ~np.isfinite(out)
    if np.any(bad):
        out = np.where(bad, LOG_FLOOR, out)
    return out


def z_pair(f: float, y: int, b: Thresholds, sigma: float):
    """Standardized distances of score f to the upper and lower edge of class y."""
    if not (1 <= int(y) <= b.r) or int(y) != y:
        raise InputError(f"category {y} outside 1..{b.r}")
    if not sigma > 0:
        raise InputError("sigma must be positive")
    e = b.edges()
    y = int(y)
    return (e[y] - f) / sigma, (e[y - 1] - f) / sigma


def z_pairs(F, Y, b: Thresholds, sigma: float):
    """Vectorized z_pair over all samples."""
    e = b.edges()
    Y = np.asarray(Y, dtype=int)
    F = np.asarray(F, dtype=float)
    return (e[Y] - F) / sigma, (e[Y - 1] - F) / sigma


def log_prob(z1: float, z2: float) -> float:
    if not z1 > z2:
        raise InputError(f"need z1 > z2, got {z1} <= {z2}")
    return float(log_mass(z1, z2))


def _check_labels(Y, r):
    Y = np.asarray(Y)
    if Y.size and (Y.min() < 1 or Y.max() > r):
        raise InputError(f"labels must lie in 1..{r}")
    return Y.astype(int)


def likelihood_terms(F, Y, b: Thresholds, sigma: float, h_min: float = H_MIN) -> LikelihoodTerms:
    """Log-likelihood, score gradient and positive curvature per sample.

    ``delta`` is signed so that dL/dw = Phi^T delta, and ``hess_diag`` is
    -d^2 L / df^2 clamped below at ``h_min``.
    """
    if not sigma > 0:
        raise InputError("sigma must be positive")
    F = np.asarray(F, dtype=float)
    Y = _check_labels(Y, b.r)
    z1, z2 = z_pairs(F, Y, b, sigma)
    lm = log_mass(z1, z2)
    r1 = np.exp(_log_pdf(z1) - lm)
    r2 = np.exp(_log_pdf(z2) - lm)
    # z * N(z) -> 0 at the infinite edges
    with np.errstate(invalid="ignore"):
        zr1 = np.where(np.isfinite(z1), z1 * r1, 0.0)
        zr2 = np.where(np.isfinite(z2), z2 * r2, 0.0)
    diff = r1 - r2
    delta = -diff / sigma
    hess = (diff * diff + zr1 - zr2) / (sigma * sigma)
    bad = ~(np.isfinite(delta) & np.isfinite(hess) & np.isfinite(lm))
    if np.any(bad):
        raise NumericError("non-finite likelihood term", index=int(np.flatnonzero(bad)[0]))
    return LikelihoodTerms(
        log_lik=float(lm.sum()),
        delta=delta,
        hess_diag=np.maximum(hess, h_min),
        upper_ratio=r1,
    )


def log_likelihood(F, Y, b: Thresholds, sigma: float) -> float:
    z1, z2 = z_pairs(F, Y, b, sigma)
    return float(log_mass(z1, z2).sum())
