"""Repeated-sampling study of the posterior for the degrees of freedom.

For each cell ``(nu, alpha, n)`` the study draws ``replications`` samples,
fits each with the sampler and records the posterior median of ``nu`` and
its equal-tail 95% interval.  Per cell it reports the relative RMSE of the
median, ``sqrt(mean((median - nu)**2)) / nu``, the coverage of the
intervals, and the median interval endpoints.
"""

from __future__ import annotations

import configparser
import csv
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ast_core import ASTParams, ast_sample
from .diagnostics import quantiles
from .errors import ChainError, DomainError, ReplicationError
from .priors import JointPriorSpec
from .sampler import SamplerConfig, chain_seeds, run_chain

logger = logging.getLogger(__name__)

DESK_REPLICATIONS = 100
DESK_SAMPLER = SamplerConfig(iterations=20_000, burn_in=2_000)


@dataclass(frozen=True)
class SimCellSpec:
    true_params: ASTParams
    n: int
    replications: int = DESK_REPLICATIONS
    sampler_cfg: SamplerConfig = DESK_SAMPLER

    def __post_init__(self):
        if self.replications < 1:
            raise DomainError("replications must be at least 1")
        if self.n < 1:
            raise DomainError("sample size must be at least 1")


@dataclass(frozen=True)
class SimCellResult:
    spec: SimCellSpec
    rel_rmse: float
    coverage: float
    median_ci: tuple
    rel_rmse_se: float = 0.0
    medians: np.ndarray = field(default=None, repr=False)
    ci_lows: np.ndarray = field(default=None, repr=False)
    ci_highs: np.ndarray = field(default=None, repr=False)

    def row(self):
        p = self.spec.true_params
        return (p.nu, p.alpha, self.spec.n, self.rel_rmse, self.coverage, *self.median_ci)


def replication_seeds(cell_seed: int, replications: int):
    """``(data_seed, chain_seed)`` for each replication, derived from the cell seed."""
    children = np.random.SeedSequence(cell_seed).spawn(replications)
    out = []
    for child in children:
        data, chain = child.generate_state(2, dtype=np.uint64) >> np.uint64(1)
        out.append((int(data), int(chain)))
    return out


def _replicate(args):
    spec, index, data_seed, chain_seed, prior = args
    sample = ast_sample(spec.true_params, spec.n, data_seed)
    cfg = replace(spec.sampler_cfg, seed=chain_seed, n_chains=1)
    try:
        trace = run_chain(sample, cfg, prior)
    except ChainError as exc:
        raise ReplicationError(str(exc), index) from exc
    lo, med, hi = quantiles(trace.nu)
    return int(med), int(lo), int(hi)


def summarize_replications(nu_true: int, medians, ci_lows, ci_highs):
    """Relative RMSE (with delta-method standard error), coverage and median interval."""
    medians = np.asarray(medians, dtype=float)
    ci_lows = np.asarray(ci_lows)
    ci_highs = np.asarray(ci_highs)
    sq = (medians - nu_true) ** 2
    mse = float(sq.mean())
    rmse = mse ** 0.5
    if rmse > 0 and sq.size > 1:
        se = float(sq.std(ddof=1)) / np.sqrt(sq.size) / (2.0 * rmse) / nu_true
    else:
        se = 0.0
    covered = int(np.sum((ci_lows <= nu_true) & (nu_true <= ci_highs)))
    median_ci = (int(quantiles(ci_lows, 0.5)), int(quantiles(ci_highs, 0.5)))
    return rmse / nu_true, se, covered / medians.size, median_ci


def run_cell(spec: SimCellSpec, prior: JointPriorSpec | None = None, n_jobs: int = 1) -> SimCellResult:
    """Run every replication of one cell; ``spec.sampler_cfg.seed`` is the cell seed."""
    if prior is None:
        prior = JointPriorSpec()
    seeds = replication_seeds(spec.sampler_cfg.seed, spec.replications)
    jobs = [(spec, i, d, c, prior) for i, (d, c) in enumerate(seeds)]
    if n_jobs == 1:
        reps = [_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            reps = list(pool.map(_replicate, jobs, chunksize=4))
    medians, lows, highs = (np.array(col) for col in zip(*reps))
    rel_rmse, se, coverage, median_ci = summarize_replications(
        spec.true_params.nu, medians, lows, highs
    )
    logger.info(
        "cell nu=%d alpha=%g n=%d: rel_rmse=%.4f coverage=%.2f median_ci=%s",
        spec.true_params.nu, spec.true_params.alpha, spec.n, rel_rmse, coverage, median_ci,
    )
    return SimCellResult(spec, rel_rmse, coverage, median_ci, se, medians, lows, highs)


def run_grid(grid, master_seed: int = 0, prior: JointPriorSpec | None = None, n_jobs: int = 1):
    """Run each cell with a seed derived from ``master_seed`` and its position."""
    grid = list(grid)
    seeds = chain_seeds(master_seed, len(grid)) if grid else []
    return [
        run_cell(replace(cell, sampler_cfg=replace(cell.sampler_cfg, seed=seed)), prior, n_jobs)
        for cell, seed in zip(grid, seeds)
    ]


def build_grid(nus, alphas, ns, replications=DESK_REPLICATIONS, sampler_cfg=DESK_SAMPLER, mu=0.0, sigma=1.0):
    return [
        SimCellSpec(ASTParams(alpha, nu, mu, sigma), n, replications, sampler_cfg)
        for nu, alpha, n in itertools.product(nus, alphas, ns)
    ]


_LIST_KEYS = {"nu": int, "alpha": float, "n": int}
_SAMPLER_KEYS = {
    "iterations": int, "burn_in": int, "thin": int, "v_alpha": float,
    "s_mu": float, "a_sigma": float, "b_sigma": float,
}


def parse_grid_config(text: str):
    """Parse ``key = value`` lines into ``(cells, master_seed)``.

    ``nu``, ``alpha`` and ``n`` take comma-separated lists and span a
    Cartesian grid.  Optional keys: ``mu``, ``sigma``, ``replications``,
    ``seed`` and the sampler settings ``iterations``, ``burn_in``, ``thin``,
    ``v_alpha``, ``s_mu``, ``a_sigma``, ``b_sigma``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    body = text if text.lstrip().startswith("[") else "[grid]\n" + text
    parser.read_string(body)
    section = parser[parser.sections()[0]] if parser.sections() else {}
    known = set(_LIST_KEYS) | set(_SAMPLER_KEYS) | {"mu", "sigma", "replications", "seed"}
    unknown = set(section) - known
    if unknown:
        raise DomainError(f"unknown grid keys: {sorted(unknown)}")
    lists = {}
    for key, kind in _LIST_KEYS.items():
        raw = section.get(key, "")
        lists[key] = [kind(v) for v in raw.replace(",", " ").split()]
    if not all(lists.values()):
        raise DomainError("grid config needs non-empty nu, alpha and n lists")
    sampler = {k: kind(section[k]) for k, kind in _SAMPLER_KEYS.items() if k in section}
    cfg = replace(DESK_SAMPLER, **sampler)
    cells = build_grid(
        lists["nu"], lists["alpha"], lists["n"],
        replications=int(section.get("replications", DESK_REPLICATIONS)),
        sampler_cfg=cfg,
        mu=float(section.get("mu", 0.0)),
        sigma=float(section.get("sigma", 1.0)),
    )
    return cells, int(section.get("seed", 0))


def read_grid_config(path):
    return parse_grid_config(Path(path).read_text())


RESULT_COLUMNS = ("nu_true", "alpha", "n", "rel_rmse", "coverage", "ci_low_med", "ci_high_med")


def write_results(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in results:
            nu, alpha, n, rel, cov, lo, hi = r.row()
            w.writerow([nu, repr(alpha), n, repr(float(rel)), repr(float(cov)), lo, hi])
