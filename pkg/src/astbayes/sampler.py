"""Metropolis-within-Gibbs sampler for the AST posterior.

One iteration updates the four parameters in the order ``nu, mu, sigma,
alpha``, each with its own Metropolis-Hastings step:

* ``nu``: independent discrete uniform proposal on ``1..30``;
* ``mu``: normal random walk with standard deviation ``s_mu``;
* ``sigma``: independence proposal ``Gamma(a_sigma, rate=b_sigma)``;
* ``alpha``: Beta proposal with mean equal to the current value and
  variance ``v_alpha``.

The inner loop is compiled with numba and draws from a
``numpy.random.Generator``, so a chain is fully determined by its seed.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .ast_core import LOG_K_TABLE, NU_MAX, ASTParams, Sample
from .errors import ChainError, DomainError
from .priors import JointPriorSpec

logger = logging.getLogger(__name__)

BLOCKS = ("nu", "mu", "sigma", "alpha")


# --------------------------------------------------------------------------
# compiled building blocks
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _log_likelihood(x, alpha, nu, mu, sigma, logk):
    left = 2.0 * alpha * sigma
    right = 2.0 * (1.0 - alpha) * sigma
    acc = 0.0
    if nu == NU_MAX:
        for xi in x:
            d = xi - mu
            z = d / left if d <= 0.0 else d / right
            acc -= 0.5 * z * z
    else:
        c = -0.5 * (nu + 1.0)
        for xi in x:
            d = xi - mu
            z = d / left if d <= 0.0 else d / right
            acc += c * math.log1p(z * z / nu)
    return x.shape[0] * (logk[nu] - math.log(sigma)) + acc


@numba.njit(cache=True)
def _log_posterior(x, alpha, nu, mu, sigma, logk, log_nu_prior):
    if not (0.0 < alpha < 1.0) or not (sigma > 0.0):
        return -np.inf
    log_alpha = -0.5 * math.log(alpha) - 0.5 * math.log1p(-alpha) - math.log(math.pi)
    return (
        _log_likelihood(x, alpha, nu, mu, sigma, logk)
        + log_nu_prior[nu]
        + log_alpha
        - math.log(sigma)
    )


@numba.njit(cache=True)
def _normal_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * z * z - math.log(sd) - 0.9189385332046727


@numba.njit(cache=True)
def _gamma_logpdf(x, shape, rate):
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * math.log(x) - rate * x


@numba.njit(cache=True)
def _beta_logpdf(x, a, b):
    return (
        (a - 1.0) * math.log(x)
        + (b - 1.0) * math.log1p(-x)
        - math.lgamma(a)
        - math.lgamma(b)
        + math.lgamma(a + b)
    )


@numba.njit(cache=True)
def _beta_moment_params(mean, var):
    # a = ((1 - m)/V - 1/m) * m**2,  b = a * (1/m - 1); negative when V >= m(1-m)
    a = ((1.0 - mean) / var - 1.0 / mean) * mean * mean
    b = a * (1.0 / mean - 1.0)
    return a, b


@numba.njit(cache=True)
def _propose_nu(rng):
    return rng.integers(1, NU_MAX + 1)


@numba.njit(cache=True)
def _propose_mu(current, s_mu, rng):
    return rng.normal(current, s_mu)


@numba.njit(cache=True)
def _propose_sigma(a_sigma, b_sigma, rng):
    return rng.gamma(a_sigma, 1.0 / b_sigma)


@numba.njit(cache=True)
def _propose_alpha(current, v_alpha, rng):
    # returns -1.0 when the moment-matched Beta does not exist
    a, b = _beta_moment_params(current, v_alpha)
    if not (a > 0.0 and b > 0.0):
        return -1.0
    return rng.beta(a, b)


@numba.njit(cache=True)
def _accept(log_ratio, rng):
    if log_ratio >= 0.0:
        return True
    return math.log(rng.random()) < log_ratio


@numba.njit(cache=True)
def _run_chain_kernel(
    x, alpha, nu, mu, sigma,
    iterations, burn_in, thin,
    s_mu, a_sigma, b_sigma, v_alpha,
    update, logk, log_nu_prior, rng,
):
    n_keep = (iterations - burn_in + thin - 1) // thin
    out_alpha = np.empty(n_keep)
    out_mu = np.empty(n_keep)
    out_sigma = np.empty(n_keep)
    out_nu = np.empty(n_keep, dtype=np.int64)
    out_iter = np.empty(n_keep, dtype=np.int64)
    accepted = np.zeros(4, dtype=np.int64)
    skipped_alpha = 0
    lp = _log_posterior(x, alpha, nu, mu, sigma, logk, log_nu_prior)
    if not np.isfinite(lp):
        return out_alpha, out_mu, out_sigma, out_nu, out_iter, accepted, skipped_alpha, 0
    k = 0
    for it in range(iterations):
        # nu: symmetric independent proposal, bare posterior ratio
        if update[0]:
            prop = _propose_nu(rng)
            lp_prop = _log_posterior(x, alpha, prop, mu, sigma, logk, log_nu_prior)
            if _accept(lp_prop - lp, rng):
                nu = prop
                lp = lp_prop
                accepted[0] += 1
        # mu: normal random walk; the proposal factors cancel but are kept
        if update[1]:
            prop = _propose_mu(mu, s_mu, rng)
            lp_prop = _log_posterior(x, alpha, nu, prop, sigma, logk, log_nu_prior)
            log_q = _normal_logpdf(mu, prop, s_mu) - _normal_logpdf(prop, mu, s_mu)
            if _accept(lp_prop - lp + log_q, rng):
                mu = prop
                lp = lp_prop
                accepted[1] += 1
        # sigma: independence Gamma proposal
        if update[2]:
            prop = _propose_sigma(a_sigma, b_sigma, rng)
            if prop > 0.0:
                lp_prop = _log_posterior(x, alpha, nu, mu, prop, logk, log_nu_prior)
                log_q = _gamma_logpdf(sigma, a_sigma, b_sigma) - _gamma_logpdf(prop, a_sigma, b_sigma)
                if _accept(lp_prop - lp + log_q, rng):
                    sigma = prop
                    lp = lp_prop
                    accepted[2] += 1
        # alpha: Beta proposal centred at the current value
        if update[3]:
            a, b = _beta_moment_params(alpha, v_alpha)
            if not (a > 0.0 and b > 0.0):
                skipped_alpha += 1
            else:
                prop = _propose_alpha(alpha, v_alpha, rng)
                if 0.0 < prop < 1.0:
                    ra, rb = _beta_moment_params(prop, v_alpha)
                    if ra > 0.0 and rb > 0.0:
                        lp_prop = _log_posterior(x, prop, nu, mu, sigma, logk, log_nu_prior)
                        log_q = _beta_logpdf(alpha, ra, rb) - _beta_logpdf(prop, a, b)
                        if _accept(lp_prop - lp + log_q, rng):
                            alpha = prop
                            lp = lp_prop
                            accepted[3] += 1
        if not np.isfinite(lp):
            return out_alpha, out_mu, out_sigma, out_nu, out_iter, accepted, skipped_alpha, it + 1
        if it >= burn_in and (it - burn_in) % thin == 0:
            out_alpha[k] = alpha
            out_mu[k] = mu
            out_sigma[k] = sigma
            out_nu[k] = nu
            out_iter[k] = it
            k += 1
    return out_alpha, out_mu, out_sigma, out_nu, out_iter, accepted, skipped_alpha, -1


# --------------------------------------------------------------------------
# public proposal helpers (same compiled code the chain uses)
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _many_nu(rng, size):
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        out[i] = _propose_nu(rng)
    return out


@numba.njit(cache=True)
def _many_mu(current, s_mu, rng, size):
    out = np.empty(size)
    for i in range(size):
        out[i] = _propose_mu(current, s_mu, rng)
    return out


@numba.njit(cache=True)
def _many_sigma(a_sigma, b_sigma, rng, size):
    out = np.empty(size)
    for i in range(size):
        out[i] = _propose_sigma(a_sigma, b_sigma, rng)
    return out


@numba.njit(cache=True)
def _many_alpha(current, v_alpha, rng, size):
    out = np.empty(size)
    for i in range(size):
        out[i] = _propose_alpha(current, v_alpha, rng)
    return out


def propose_nu(rng: np.random.Generator, size=None):
    """Uniform draw on ``1..30``; ``size`` gives an array of independent draws."""
    if size is None:
        return int(_propose_nu(rng))
    return _many_nu(rng, int(size))


def propose_mu(current: float, s_mu: float, rng: np.random.Generator, size=None):
    if not s_mu > 0:
        raise DomainError("s_mu must be positive")
    if size is None:
        return float(_propose_mu(float(current), float(s_mu), rng))
    return _many_mu(float(current), float(s_mu), rng, int(size))


def propose_sigma(a_sigma: float, b_sigma: float, rng: np.random.Generator, size=None):
    """Gamma draw with shape ``a_sigma`` and rate ``b_sigma``."""
    if not (a_sigma > 0 and b_sigma > 0):
        raise DomainError("Gamma proposal parameters must be positive")
    if size is None:
        return float(_propose_sigma(float(a_sigma), float(b_sigma), rng))
    return _many_sigma(float(a_sigma), float(b_sigma), rng, int(size))


def beta_moment_params(mean: float, var: float) -> tuple[float, float]:
    """Beta shape parameters with the given mean and variance (may be non-positive)."""
    a, b = _beta_moment_params(float(mean), float(var))
    return float(a), float(b)


def propose_alpha(current: float, v_alpha: float, rng: np.random.Generator, size=None):
    """Beta draw with mean ``current`` and variance ``v_alpha``.

    Returns ``None`` when ``v_alpha >= current*(1-current)``: no such Beta
    exists and the chain leaves ``alpha`` unchanged for that iteration.
    """
    a, b = beta_moment_params(current, v_alpha)
    if not (a > 0 and b > 0):
        return None
    if size is None:
        return float(_propose_alpha(float(current), float(v_alpha), rng))
    return _many_alpha(float(current), float(v_alpha), rng, int(size))


def acceptance_probability(log_target_ratio: float, log_proposal_ratio: float = 0.0) -> float:
    """``min(1, exp(log_target_ratio + log_proposal_ratio))``."""
    return math.exp(min(0.0, log_target_ratio + log_proposal_ratio))


def log_proposal_ratio_mu(current, proposed, s_mu):
    """``log phi(current | proposed) - log phi(proposed | current)``; always zero."""
    return float(_normal_logpdf(current, proposed, s_mu) - _normal_logpdf(proposed, current, s_mu))


def log_proposal_ratio_sigma(current, proposed, a_sigma, b_sigma):
    return float(_gamma_logpdf(current, a_sigma, b_sigma) - _gamma_logpdf(proposed, a_sigma, b_sigma))


def log_proposal_ratio_alpha(current, proposed, v_alpha):
    a, b = _beta_moment_params(current, v_alpha)
    ra, rb = _beta_moment_params(proposed, v_alpha)
    if not (a > 0 and b > 0 and ra > 0 and rb > 0):
        return -math.inf
    return float(_beta_logpdf(current, ra, rb) - _beta_logpdf(proposed, a, b))


# --------------------------------------------------------------------------
# configuration and traces
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplerConfig:
    """Run length and proposal tuning.

    ``s_mu``, ``a_sigma`` and ``b_sigma`` may be left as ``None`` and are
    then filled from the data by :meth:`resolve`.  ``update`` lists the
    blocks that move; the others stay at their initial values.
    """

    iterations: int = 100_000
    burn_in: int = 5_000
    n_chains: int = 1
    s_mu: float | None = None
    a_sigma: float | None = None
    b_sigma: float | None = None
    v_alpha: float = 0.01
    seed: int = 0
    thin: int = 1
    update: tuple = BLOCKS

    def __post_init__(self):
        if self.iterations < 1 or self.burn_in < 0 or self.burn_in >= self.iterations:
            raise DomainError("need 0 <= burn_in < iterations")
        if self.n_chains < 1:
            raise DomainError("n_chains must be at least 1")
        if self.thin < 1:
            raise DomainError("thin must be at least 1")
        if not 0.0 < self.v_alpha < 0.25:
            raise DomainError("v_alpha must lie in (0, 0.25)")
        for name in ("s_mu", "a_sigma", "b_sigma"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise DomainError(f"{name} must be positive")
        unknown = set(self.update) - set(BLOCKS)
        if unknown:
            raise DomainError(f"unknown blocks {sorted(unknown)}")
        object.__setattr__(self, "update", tuple(b for b in BLOCKS if b in self.update))

    @property
    def n_keep(self) -> int:
        return (self.iterations - self.burn_in + self.thin - 1) // self.thin

    def resolve(self, s) -> "SamplerConfig":
        """Fill unset tuning constants from the sample.

        With ``scale = pilot_scale(s)``, ``s_mu`` defaults to
        ``2 * scale / sqrt(n)`` and the Gamma proposal for ``sigma`` is
        moment-matched to mean ``scale`` and variance ``scale**2 / 2``.
        """
        values = s.values if isinstance(s, Sample) else np.asarray(s, dtype=float)
        scale = pilot_scale(values)
        changes = {}
        if self.s_mu is None:
            changes["s_mu"] = 2.0 * scale / math.sqrt(values.size)
        if self.a_sigma is None:
            changes["a_sigma"] = 2.0
        if self.b_sigma is None:
            changes["b_sigma"] = 2.0 / scale
        return replace(self, **changes) if changes else self


def pilot_scale(values) -> float:
    """Robust scale guess, ``1.4826 * MAD``, falling back to the standard deviation."""
    values = np.asarray(values, dtype=float)
    mad = float(np.median(np.abs(values - np.median(values))))
    if mad > 0:
        return 1.4826 * mad
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return sd if sd > 0 else 1.0


@dataclass(frozen=True)
class Trace:
    """Retained draws of one chain, after burn-in and thinning."""

    alpha: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    nu: np.ndarray
    acceptance_rates: dict
    seed: int
    iteration: np.ndarray = field(default=None, repr=False)
    alpha_skipped: int = 0

    def __post_init__(self):
        n = len(self.alpha)
        if not all(len(getattr(self, k)) == n for k in ("mu", "sigma", "nu")):
            raise DomainError("trace arrays must have equal length")
        if self.iteration is None:
            object.__setattr__(self, "iteration", np.arange(n, dtype=np.int64))

    def __len__(self):
        return len(self.alpha)

    def __getitem__(self, name) -> np.ndarray:
        if name not in BLOCKS:
            raise KeyError(name)
        return getattr(self, name)

    def params(self, i: int) -> ASTParams:
        return ASTParams(self.alpha[i], int(self.nu[i]), self.mu[i], self.sigma[i])

    @classmethod
    def pooled(cls, traces) -> "Trace":
        traces = list(traces)
        return cls(
            alpha=np.concatenate([t.alpha for t in traces]),
            mu=np.concatenate([t.mu for t in traces]),
            sigma=np.concatenate([t.sigma for t in traces]),
            nu=np.concatenate([t.nu for t in traces]),
            acceptance_rates={
                b: float(np.mean([t.acceptance_rates[b] for t in traces]))
                for b in BLOCKS
                if all(b in t.acceptance_rates for t in traces)
            },
            seed=traces[0].seed,
            iteration=np.concatenate([t.iteration for t in traces]),
            alpha_skipped=sum(t.alpha_skipped for t in traces),
        )


def write_trace(trace: Trace, path) -> None:
    """One row per retained iteration: ``iter,alpha,mu,sigma,nu``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "alpha", "mu", "sigma", "nu"])
        for row in zip(trace.iteration, trace.alpha, trace.mu, trace.sigma, trace.nu):
            w.writerow([int(row[0]), repr(float(row[1])), repr(float(row[2])), repr(float(row[3])), int(row[4])])


def read_trace(path, seed: int = 0) -> Trace:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    data = np.atleast_1d(data)
    return Trace(
        alpha=np.asarray(data["alpha"], dtype=float),
        mu=np.asarray(data["mu"], dtype=float),
        sigma=np.asarray(data["sigma"], dtype=float),
        nu=np.asarray(data["nu"], dtype=np.int64),
        acceptance_rates={b: float("nan") for b in BLOCKS},
        seed=seed,
        iteration=np.asarray(data["iter"], dtype=np.int64),
    )


# --------------------------------------------------------------------------
# drivers
# --------------------------------------------------------------------------


def default_init(s) -> ASTParams:
    values = s.values if isinstance(s, Sample) else np.asarray(s, dtype=float)
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 1.0
    return ASTParams(0.5, 5, float(np.median(values)), sd if sd > 0 else 1.0)


def dispersed_inits(s, n_chains: int, seed: int) -> list[ASTParams]:
    """The default start for chain 0, then deterministic random perturbations of it."""
    base = default_init(s)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1A57]))
    inits = [base]
    for _ in range(n_chains - 1):
        inits.append(
            ASTParams(
                alpha=float(rng.uniform(0.2, 0.8)),
                nu=int(rng.integers(1, NU_MAX + 1)),
                mu=base.mu + base.sigma * float(rng.normal()),
                sigma=base.sigma * float(np.exp(rng.uniform(-0.5, 0.5))),
            )
        )
    return inits


def run_chain(s, cfg: SamplerConfig, spec: JointPriorSpec | None = None, init: ASTParams | None = None) -> Trace:
    """Run one chain seeded with ``cfg.seed``.

    Same ``(s, cfg, spec, init)`` gives a bit-identical trace.
    """
    if spec is None:
        spec = JointPriorSpec()
    if not isinstance(s, Sample):
        s = Sample(s)
    cfg = cfg.resolve(s)
    if init is None:
        init = default_init(s)
    log_nu_prior = np.concatenate([[np.nan], spec.nu_table.log_masses])
    update = np.array([b in cfg.update for b in BLOCKS])
    rng = np.random.default_rng(cfg.seed)
    a, m, sg, nu, it, accepted, skipped, fail = _run_chain_kernel(
        np.ascontiguousarray(s.values), init.alpha, init.nu, init.mu, init.sigma,
        cfg.iterations, cfg.burn_in, cfg.thin,
        float(cfg.s_mu), float(cfg.a_sigma), float(cfg.b_sigma), float(cfg.v_alpha),
        update, LOG_K_TABLE, log_nu_prior, rng,
    )
    if fail >= 0:
        raise ChainError("log posterior is not finite", fail)
    rates = {b: float(accepted[i]) / cfg.iterations for i, b in enumerate(BLOCKS)}
    logger.debug("chain seed=%s acceptance=%s alpha_skipped=%d", cfg.seed, rates, skipped)
    return Trace(a, m, sg, nu, rates, cfg.seed, it, int(skipped))


def chain_seeds(master_seed: int, n_chains: int) -> list[int]:
    children = np.random.SeedSequence(master_seed).spawn(n_chains)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in children]


def _run_one(args):
    return run_chain(*args)


def run_chains(s, cfg: SamplerConfig, spec: JointPriorSpec | None = None, inits=None, n_jobs: int = 1) -> list[Trace]:
    """Run ``cfg.n_chains`` independent chains with seeds derived from ``cfg.seed``."""
    if spec is None:
        spec = JointPriorSpec()
    if not isinstance(s, Sample):
        s = Sample(s)
    if inits is None:
        inits = dispersed_inits(s, cfg.n_chains, cfg.seed)
    if len(inits) != cfg.n_chains:
        raise DomainError(f"expected {cfg.n_chains} initial points, got {len(inits)}")
    cfg = cfg.resolve(s)
    jobs = [
        (s, replace(cfg, seed=seed, n_chains=1), spec, init)
        for seed, init in zip(chain_seeds(cfg.seed, cfg.n_chains), inits)
    ]
    if n_jobs == 1 or len(jobs) == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_one, jobs))
