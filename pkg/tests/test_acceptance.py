"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (add ``-m 'not slow'`` to skip the
multi-minute repeated-sampling check).  The real-data criterion runs only when
``ASTBAYES_DANISH`` and ``ASTBAYES_US`` point to one-loss-per-line files.
"""

import math
import os
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from astbayes.ast_core import ASTParams, Sample, ast_pdf, ast_sample
from astbayes.cli import main
from astbayes.diagnostics import predictive_moments, summarize
from astbayes.nu_prior import DEFAULT_QUAD_TOL, kl_divergence
from astbayes.sampler import SamplerConfig, Trace, run_chain, run_chains
from astbayes.sim_study import DESK_REPLICATIONS, DESK_SAMPLER, build_grid, run_grid

from oracles import ast_logpdf_bruteforce, oracle_prior_table


def test_criterion_1_alpha_invariance(report):
    worst = 0.0
    for nu in range(1, 30):
        half = kl_divergence(ASTParams(0.5, nu, 0, 1), ASTParams(0.5, nu + 1, 0, 1), DEFAULT_QUAD_TOL)
        for alpha in (0.1, 0.3, 0.5, 0.8):
            d = kl_divergence(ASTParams(alpha, nu, 0, 1), ASTParams(alpha, nu + 1, 0, 1), DEFAULT_QUAD_TOL)
            worst = max(worst, abs(d - half))
    assert report(1, worst < 1e-7, f"max |D_alpha - D_half| = {worst:.2e}, bound 1e-7")


def test_criterion_2_prior_table_oracle(report, prior_table):
    _, oracle = oracle_prior_table()
    err = float(np.max(np.abs(prior_table.masses - oracle)))
    total = abs(prior_table.masses.sum() - 1.0)
    ok = err < 1e-7 and total < 1e-12
    assert report(2, ok, f"max mass error {err:.2e} (bound 1e-7), |sum - 1| = {total:.1e}")


def _integrals(p):
    f = lambda x: ast_pdf(x, p)
    kw = dict(epsabs=1e-13, epsrel=1e-12, limit=500)
    left = integrate.quad(f, -np.inf, p.mu, **kw)[0]
    right = integrate.quad(f, p.mu, np.inf, **kw)[0]
    return left, right


def test_criterion_3_normalization(report):
    worst_total = worst_left = 0.0
    for alpha in (0.05, 0.3, 0.5, 0.8, 0.95):
        for nu in (1, 2, 5, 10, 29, 30):
            left, right = _integrals(ASTParams(alpha, nu, 1.0, 2.0))
            worst_total = max(worst_total, abs(left + right - 1.0))
            worst_left = max(worst_left, abs(left - alpha))
    ok = worst_total < 1e-8 and worst_left < 1e-8
    assert report(3, ok, f"max |mass - 1| = {worst_total:.1e}, max |left - alpha| = {worst_left:.1e}")


def _recovers(seed):
    truth = ASTParams(0.35, 6, 2.0, 1.5)
    sample = ast_sample(truth, 200, seed)
    s = summarize(run_chain(sample, SamplerConfig(iterations=100_000, burn_in=5_000, seed=seed)))
    inside = all(s[k].ci_low <= v <= s[k].ci_high for k, v in zip(("alpha", "nu", "mu", "sigma"), truth.as_tuple()))
    return inside and 4 <= s.nu.median <= 9 and abs(s.alpha.mean - 0.35) <= 0.1


def test_criterion_4_single_sample_recovery(report):
    passed = [seed for seed in range(10) if _recovers(seed)]
    assert report(4, len(passed) >= 9, f"{len(passed)}/10 seeds recovered (need 9), seeds {passed}")


@pytest.mark.slow
def test_criterion_5_repeated_sampling(report):
    grid = build_grid([1, 3], [0.3, 0.5], [1000], DESK_REPLICATIONS, DESK_SAMPLER)
    results = run_grid(grid, master_seed=0)
    allowed = {1: {(1, 1)}, 3: {(3, 3), (2, 3), (3, 4)}}
    ok = True
    parts = []
    for r in results:
        nu, alpha = r.spec.true_params.nu, r.spec.true_params.alpha
        good = r.median_ci in allowed[nu] and r.coverage >= 0.80
        ok &= good
        parts.append(f"nu={nu} a={alpha}: ci={r.median_ci} cov={r.coverage:.2f}")
    assert report(5, ok, "; ".join(parts))


def test_criterion_6_mh_stationarity(report, prior_spec):
    data = np.array([-2.1, -0.7, -0.2, 0.9, 1.6, 2.4, 4.0])
    nu, mu, sigma = 4, 0.5, 1.0

    def unnormalized(a):
        like = sum(ast_logpdf_bruteforce(x, a, nu, mu, sigma) for x in data)
        return math.exp(like) * stats.beta.pdf(a, 0.5, 0.5)

    edges = np.linspace(0.0, 1.0, 21)
    exact = np.array([integrate.quad(unnormalized, lo, hi, epsabs=1e-14, limit=200)[0]
                      for lo, hi in zip(edges[:-1], edges[1:])])
    exact /= exact.sum()

    cfg = SamplerConfig(iterations=400_000, burn_in=2_000, update=("alpha",), seed=6)
    t = run_chain(Sample(data), cfg, prior_spec, ASTParams(0.5, nu, mu, sigma))
    empirical = np.histogram(t.alpha, bins=edges)[0] / len(t)
    tv = 0.5 * float(np.abs(empirical - exact).sum())
    assert report(6, tv < 0.02, f"total variation {tv:.4f} on 20 bins, bound 0.02")


def _dataset(var, report):
    path = os.environ.get(var)
    if not path or not Path(path).is_file():
        report(7, None, f"{var} not set to a data file")
        pytest.skip(f"set {var} to a one-value-per-line loss file to run this check")
    from astbayes.cli import ingest

    return ingest(path, log_transform=True, quiet=True)


def _fit_real(sample, v_alpha):
    cfg = SamplerConfig(iterations=100_000, burn_in=5_000, n_chains=2, v_alpha=v_alpha, seed=0)
    start = ASTParams(0.05, 10, float(np.median(sample.values)), float(np.std(sample.values, ddof=1)))
    return Trace.pooled(run_chains(sample, cfg, inits=[start, start.replace(alpha=0.5)]))


def test_criterion_7_real_data(report):
    danish = _dataset("ASTBAYES_DANISH", report)
    us = _dataset("ASTBAYES_US", report)
    # alpha near 0 needs a proposal variance far below alpha(1 - alpha)
    dt = _fit_real(danish, 2.5e-5)
    ds = summarize(dt)
    moments = predictive_moments(dt, seed=0, repeats=4)
    pred_ok = all(abs(a - b) <= 0.05 for a, b in zip(
        (moments.mean, moments.std_dev, moments.skewness), (0.79, 0.72, 1.77)))
    us_s = summarize(_fit_real(us, 0.01))
    ok = (8 <= ds.nu.median <= 12 and ds.alpha.mean < 0.01 and pred_ok
          and us_s.alpha.ci_low <= 0.5 <= us_s.alpha.ci_high and us_s.nu.median >= 21)
    detail = (f"danish nu med {ds.nu.median}, alpha mean {ds.alpha.mean:.4f}, predictive "
              f"({moments.mean:.3f}, {moments.std_dev:.3f}, {moments.skewness:.3f}); "
              f"us alpha ci ({us_s.alpha.ci_low:.3f}, {us_s.alpha.ci_high:.3f}), nu med {us_s.nu.median}")
    assert report(7, ok, detail)


def _numeric_files(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir()) if p.name != "manifest.json"}


def test_criterion_8_replay_determinism(report, tmp_path):
    runs = {}
    sim = tmp_path / "simulate"
    runs["simulate"] = ["simulate", "--alpha", "0.35", "--nu", "6", "--mu", "2", "--sigma", "1.5",
                        "--n", "200", "--seed", "5", "--out", str(sim)]
    assert main(runs["simulate"]) == 0
    grid = tmp_path / "grid.ini"
    grid.write_text("nu = 2\nalpha = 0.4\nn = 60\nreplications = 3\niterations = 800\nburn_in = 100\n")
    runs["fit"] = ["fit", "--input", str(sim / "data.txt"), "--iterations", "6000", "--burn-in", "1000",
                   "--chains", "2", "--seed", "3", "--grid-points", "128", "--out", str(tmp_path / "fit")]
    runs["prior-table"] = ["prior-table", "--out", str(tmp_path / "prior-table")]
    runs["sim-study"] = ["sim-study", "--grid-config", str(grid), "--out", str(tmp_path / "sim-study")]
    for name in ("fit", "prior-table", "sim-study"):
        assert main(runs[name]) in (0, 5)
    runs["predictive"] = ["predictive", "--input", str(tmp_path / "fit"), "--out", str(tmp_path / "predictive")]
    assert main(runs["predictive"]) == 0

    mismatched = []
    for name in runs:
        original = tmp_path / name
        again = tmp_path / f"{name}-replay"
        main(["replay", str(original / "manifest.json"), "--out", str(again)])
        first, second = _numeric_files(original), _numeric_files(again)
        if not first or first != second:
            mismatched.append(name)
    ok = not mismatched
    assert report(8, ok, f"{len(runs) - len(mismatched)}/{len(runs)} commands byte-identical on replay"
                  + (f", mismatched {mismatched}" if mismatched else ""))
