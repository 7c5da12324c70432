"""Asymmetric Student-t (AST) density, variates, likelihood and sample statistics.

The AST density is piecewise: to the left of the location ``mu`` it is a
Student-t kernel with scale ``2*alpha*sigma``, to the right one with scale
``2*(1-alpha)*sigma``, both sharing the normalizing constant ``K(nu)/sigma``.
The left branch carries probability ``alpha``.

Degrees of freedom are integral in ``1..NU_MAX``; ``nu == NU_MAX`` stands for
the skewed normal limit, whose kernel is ``exp(-z**2 / 2)`` with the same
branch scales and constant ``1/(sigma*sqrt(2*pi))``.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

NU_MAX = 30
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_nu(nu) -> int:
    if isinstance(nu, bool) or not isinstance(nu, numbers.Integral):
        if isinstance(nu, numbers.Real) and float(nu).is_integer():
            nu = int(nu)
        else:
            raise DomainError(f"nu must be an integer in 1..{NU_MAX}, got {nu!r}")
    nu = int(nu)
    if not 1 <= nu <= NU_MAX:
        raise DomainError(f"nu must be an integer in 1..{NU_MAX}, got {nu}")
    return nu


@dataclass(frozen=True)
class ASTParams:
    """Parameters ``(alpha, nu, mu, sigma)`` of the AST model."""

    alpha: float
    nu: int
    mu: float
    sigma: float

    def __post_init__(self):
        alpha, mu, sigma = float(self.alpha), float(self.mu), float(self.sigma)
        if not (0.0 < alpha < 1.0):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not math.isfinite(mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        if not (sigma > 0.0 and math.isfinite(sigma)):
            raise DomainError(f"sigma must be positive and finite, got {self.sigma!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "nu", _check_nu(self.nu))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def replace(self, **changes) -> "ASTParams":
        values = {"alpha": self.alpha, "nu": self.nu, "mu": self.mu, "sigma": self.sigma}
        values.update(changes)
        return ASTParams(**values)

    def as_tuple(self):
        return (self.alpha, self.nu, self.mu, self.sigma)


@dataclass(frozen=True)
class Sample:
    """Observations, optionally already on the log scale."""

    values: np.ndarray
    log_transformed: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size == 0:
            raise DomainError("sample must contain at least one observation")
        if not np.all(np.isfinite(values)):
            raise DomainError("sample values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    def concat(self, other: "Sample") -> "Sample":
        return Sample(np.concatenate([self.values, other.values]), self.log_transformed)


@dataclass(frozen=True)
class DescriptiveStats:
    mean: float
    std_dev: float
    skewness: float
    n: int = field(default=0)


def log_k(nu: int) -> float:
    """Log of the density constant at the mode (``sigma == 1``).

    For Student-t kernels this is ``log Gamma((nu+1)/2) - log Gamma(nu/2) -
    log sqrt(pi*nu)``; for the normal endpoint it is ``-log sqrt(2*pi)``.
    """
    nu = _check_nu(nu)
    if nu == NU_MAX:
        return -_LOG_SQRT_2PI
    return float(gammaln((nu + 1) / 2.0) - gammaln(nu / 2.0) - 0.5 * math.log(math.pi * nu))


LOG_K_TABLE = np.array([np.nan] + [log_k(v) for v in range(1, NU_MAX + 1)])


def _log_kernel(z, nu):
    # z is the branch-standardized residual
    if nu == NU_MAX:
        return -0.5 * z * z
    return -0.5 * (nu + 1) * np.log1p(z * z / nu)


def ast_log_pdf(x, p: ASTParams):
    """Log density of the AST distribution at ``x`` (scalar or array).

    The point ``x == mu`` belongs to the left branch; both branches agree
    there, so the choice only matters for bookkeeping.
    """
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise DomainError("x must be finite")
    d = xa - p.mu
    scale = np.where(d <= 0.0, 2.0 * p.alpha * p.sigma, 2.0 * (1.0 - p.alpha) * p.sigma)
    out = LOG_K_TABLE[p.nu] - math.log(p.sigma) + _log_kernel(d / scale, p.nu)
    if out.ndim == 0:
        return float(out)
    return out


def ast_pdf(x, p: ASTParams):
    return np.exp(ast_log_pdf(x, p))


def _standard_t(rng: np.random.Generator, nu: int, size: int) -> np.ndarray:
    # normal over sqrt(chi2/nu); nu == NU_MAX is the normal endpoint
    z = rng.standard_normal(size)
    if nu == NU_MAX:
        return z
    return z / np.sqrt(rng.chisquare(nu, size) / nu)


def ast_sample(p: ASTParams, n: int, rng_seed=None) -> Sample:
    """Draw ``n`` i.i.d. AST variates.

    Each draw lands on the left of ``mu`` with probability ``alpha``, at
    distance ``2*alpha*sigma*|T|``, otherwise on the right at distance
    ``2*(1-alpha)*sigma*|T|`` where ``T`` is standard Student-t.

    ``rng_seed`` may be an integer seed or a ``numpy.random.Generator``.
    """
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    n = int(n)
    left = rng.random(n) < p.alpha
    t = np.abs(_standard_t(rng, p.nu, n))
    values = np.where(
        left,
        p.mu - 2.0 * p.alpha * p.sigma * t,
        p.mu + 2.0 * (1.0 - p.alpha) * p.sigma * t,
    )
    return Sample(values)


def _as_values(s) -> np.ndarray:
    if isinstance(s, Sample):
        return s.values
    values = np.asarray(s, dtype=float).ravel()
    if values.size == 0:
        raise DomainError("sample must contain at least one observation")
    return values


def ast_log_likelihood(s, p: ASTParams) -> float:
    """Sum of log densities over the observations in ``s``."""
    values = _as_values(s)
    return float(np.sum(ast_log_pdf(values, p)))


def descriptive_stats(s) -> DescriptiveStats:
    """Mean, sample standard deviation (n-1) and moment skewness m3/m2**1.5."""
    values = _as_values(s)
    n = values.size
    if n < 3:
        raise DomainError("skewness needs at least 3 observations")
    mean = float(np.mean(values))
    dev = values - mean
    m2 = float(np.mean(dev**2))
    m3 = float(np.mean(dev**3))
    skew = m3 / m2**1.5 if m2 > 0 else 0.0
    return DescriptiveStats(mean=mean, std_dev=float(np.std(values, ddof=1)), skewness=skew, n=n)
