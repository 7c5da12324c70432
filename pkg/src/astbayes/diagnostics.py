"""Posterior summaries, convergence checks and posterior predictive output."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .ast_core import LOG_K_TABLE, DescriptiveStats, _log_kernel, _standard_t, descriptive_stats
from .errors import DiagnosticsError, DomainError
from .sampler import BLOCKS, Trace

QUANTILES = (0.025, 0.5, 0.975)


@dataclass(frozen=True)
class ParameterSummary:
    mean: float
    median: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class PosteriorSummary:
    alpha: ParameterSummary
    mu: ParameterSummary
    sigma: ParameterSummary
    nu: ParameterSummary
    n_draws: int

    def __getitem__(self, name) -> ParameterSummary:
        if name not in BLOCKS:
            raise KeyError(name)
        return getattr(self, name)

    def rows(self):
        for name in ("alpha", "mu", "sigma", "nu"):
            s = self[name]
            yield name, s.mean, s.median, s.ci_low, s.ci_high


def quantiles(draws, probs=QUANTILES) -> np.ndarray:
    """Nearest-rank (inverse empirical CDF) quantiles; always attained draws."""
    return np.quantile(np.asarray(draws), probs, method="inverted_cdf")


def _summarize_one(draws, integer=False) -> ParameterSummary:
    lo, med, hi = quantiles(draws)
    if integer:
        lo, med, hi = int(lo), int(med), int(hi)
    else:
        lo, med, hi = float(lo), float(med), float(hi)
    return ParameterSummary(float(np.mean(draws)), med, lo, hi)


def summarize(t: Trace) -> PosteriorSummary:
    """Mean, median and equal-tail 95% interval for every parameter."""
    if len(t) == 0:
        raise DomainError("cannot summarize an empty trace")
    return PosteriorSummary(
        alpha=_summarize_one(t.alpha),
        mu=_summarize_one(t.mu),
        sigma=_summarize_one(t.sigma),
        nu=_summarize_one(t.nu, integer=True),
        n_draws=len(t),
    )


def _draws(t, parameter):
    if isinstance(t, Trace):
        return np.asarray(t[parameter], dtype=float)
    return np.asarray(t, dtype=float)


def gelman_rubin(traces, parameter="alpha") -> float:
    """Potential scale reduction factor of Gelman and Rubin (no df correction).

    With ``m`` chains of length ``n``, ``W`` the mean within-chain variance
    and ``B`` ``n`` times the variance of the chain means,
    ``PSRF = sqrt(((n - 1)/n * W + B/n) / W)``.

    ``traces`` may hold :class:`Trace` objects or plain 1-D arrays.
    """
    chains = [_draws(t, parameter) for t in traces]
    if len(chains) < 2:
        raise DiagnosticsError("need at least two chains")
    n = len(chains[0])
    if any(len(c) != n for c in chains):
        raise DiagnosticsError("chains must have equal length")
    if n < 2:
        raise DiagnosticsError("chains need at least two draws")
    x = np.vstack(chains)
    means = x.mean(axis=1)
    w = float(np.mean(x.var(axis=1, ddof=1)))
    if not w > 0:
        raise DiagnosticsError("within-chain variance is zero")
    b = n * float(np.var(means, ddof=1))
    return float(np.sqrt(((n - 1) / n * w + b / n) / w))


def running_mean(t, parameter="alpha") -> np.ndarray:
    draws = _draws(t, parameter)
    if draws.size == 0:
        raise DomainError("empty trace")
    return np.cumsum(draws) / np.arange(1, draws.size + 1)


@dataclass(frozen=True)
class PredictiveDensity:
    grid: np.ndarray
    density: np.ndarray
    n_posterior_draws: int

    @property
    def mass(self) -> float:
        """Trapezoid integral of the density over the grid."""
        return float(trapezoid(self.density, self.grid))


def posterior_predictive(t: Trace, grid, chunk: int = 4096) -> PredictiveDensity:
    """Average of the AST density over all retained draws, on ``grid``."""
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise DomainError("grid must not be empty")
    if len(t) == 0:
        raise DomainError("empty trace")
    total = np.zeros_like(grid)
    # group draws by nu so each chunk is one vectorized evaluation
    for nu in np.unique(t.nu):
        idx = np.flatnonzero(t.nu == nu)
        for start in range(0, idx.size, chunk):
            sel = idx[start:start + chunk]
            total += _mixture_sum(grid, t.alpha[sel], int(nu), t.mu[sel], t.sigma[sel])
    return PredictiveDensity(grid, total / len(t), len(t))


def _mixture_sum(grid, alpha, nu, mu, sigma):
    # sums ast_pdf(grid, (alpha_i, nu, mu_i, sigma_i)) over i
    d = grid[None, :] - mu[:, None]
    scale = np.where(d <= 0.0, 2.0 * alpha[:, None], 2.0 * (1.0 - alpha[:, None])) * sigma[:, None]
    logf = LOG_K_TABLE[nu] - np.log(sigma)[:, None] + _log_kernel(d / scale, nu)
    return np.exp(logf).sum(axis=0)


def predictive_draws(t: Trace, seed=0) -> np.ndarray:
    """One AST variate per retained posterior draw."""
    rng = np.random.default_rng(seed)
    n = len(t)
    out = np.empty(n)
    left = rng.random(n) < t.alpha
    for nu in np.unique(t.nu):
        idx = np.flatnonzero(t.nu == nu)
        out[idx] = np.abs(_standard_t(rng, int(nu), idx.size))
    return np.where(
        left,
        t.mu - 2.0 * t.alpha * t.sigma * out,
        t.mu + 2.0 * (1.0 - t.alpha) * t.sigma * out,
    )


def predictive_moments(t: Trace, seed=0, repeats: int = 1) -> DescriptiveStats:
    """Monte Carlo mean, SD and skewness of the posterior predictive."""
    draws = np.concatenate([predictive_draws(t, [seed, r]) for r in range(repeats)])
    return descriptive_stats(draws)


def default_grid(t: Trace, points: int = 512, seed=0, coverage=0.999) -> np.ndarray:
    """Grid spanning the central ``coverage`` part of the predictive distribution.

    Half the points are evenly spaced, half sit at predictive quantiles so
    the peak stays resolved when the tails are very long.
    """
    draws = predictive_draws(t, seed)
    tail = (1.0 - coverage) / 2.0
    lo, hi = np.quantile(draws, [tail, 1.0 - tail])
    even = np.linspace(lo, hi, points - points // 2)
    spread = np.quantile(draws, np.linspace(tail, 1.0 - tail, points // 2))
    return np.union1d(even, spread)


def write_summary(summary: PosteriorSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "mean", "median", "ci_low", "ci_high"])
        for name, *vals in summary.rows():
            w.writerow([name, *(repr(v) if isinstance(v, float) else v for v in vals)])


def write_predictive(pred: PredictiveDensity, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grid", "density"])
        for g, d in zip(pred.grid, pred.density):
            w.writerow([repr(float(g)), repr(float(d))])

