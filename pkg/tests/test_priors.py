import math

import numpy as np
import pytest
from scipy import stats

from astbayes.ast_core import ASTParams, Sample
from astbayes.errors import DomainError
from astbayes.priors import JointPriorSpec, log_alpha_prior, log_beta_pdf, log_joint_prior, log_posterior

from oracles import ast_logpdf_bruteforce


def test_beta_half_at_half():
    # 1 / (B(1/2, 1/2) * sqrt(1/4)) = 2 / pi
    assert log_alpha_prior(0.5) == pytest.approx(math.log(2 / math.pi), abs=1e-14)


@pytest.mark.parametrize("x", [0.01, 0.2, 0.77])
def test_beta_matches_scipy(x):
    assert log_beta_pdf(x, 2.5, 0.7) == pytest.approx(stats.beta.logpdf(x, 2.5, 0.7), rel=1e-12)


def test_alpha_term_at_half(prior_spec):
    p = ASTParams(0.5, 4, 0.0, 1.0)
    assert log_joint_prior(p, prior_spec) - math.log(prior_spec.nu_table.mass(4)) == pytest.approx(
        math.log(2 / math.pi), abs=1e-14
    )


def test_scale_term(prior_spec):
    p = ASTParams(0.3, 7, 1.0, 1.0)
    diff = log_joint_prior(p.replace(sigma=2.0), prior_spec) - log_joint_prior(p, prior_spec)
    assert diff == pytest.approx(-math.log(2.0), abs=1e-14)


def test_full_value_by_summands(prior_spec):
    p = ASTParams(0.35, 6, 2.0, 1.5)
    expected = (
        math.log(prior_spec.nu_table.masses[5])
        + math.log(math.gamma(1.0) / (math.gamma(0.5) ** 2) * 0.35 ** -0.5 * 0.65 ** -0.5)
        - math.log(1.5)
    )
    assert log_joint_prior(p, prior_spec) == pytest.approx(expected, abs=1e-12)


def test_alpha_prior_is_fixed():
    with pytest.raises(DomainError):
        JointPriorSpec(alpha_a=1.0)


def test_posterior_ratio_bruteforce(prior_spec):
    data = [-0.4, 0.3, 2.2]
    p1 = ASTParams(0.4, 3, 0.1, 0.9)
    p2 = ASTParams(0.6, 8, -0.2, 1.4)

    def unnormalized(p):
        like = math.prod(math.exp(ast_logpdf_bruteforce(x, *p.as_tuple())) for x in data)
        prior = prior_spec.nu_table.mass(p.nu) * stats.beta.pdf(p.alpha, 0.5, 0.5) / p.sigma
        return like * prior

    ratio = math.exp(log_posterior(data, p1, prior_spec) - log_posterior(data, p2, prior_spec))
    assert ratio == pytest.approx(unnormalized(p1) / unnormalized(p2), rel=1e-10)


def test_posterior_is_sum(prior_spec, recovery_sample):
    from astbayes.ast_core import ast_log_likelihood

    p = ASTParams(0.3, 9, 1.8, 1.2)
    assert log_posterior(recovery_sample, p, prior_spec) == ast_log_likelihood(recovery_sample, p) + log_joint_prior(p, prior_spec)


def test_empty_sample(prior_spec):
    with pytest.raises(DomainError):
        log_posterior([], ASTParams(0.5, 1, 0, 1), prior_spec)


def test_location_shift_invariance(prior_spec, recovery_sample):
    c = 13.7
    shifted = Sample(recovery_sample.values + c)
    base = [ASTParams(0.3, 4, 1.9, 1.2), ASTParams(0.45, 11, 1.9, 2.0), ASTParams(0.6, 30, 1.9, 0.8)]
    diffs = [log_posterior(recovery_sample, p, prior_spec) - log_posterior(recovery_sample, base[0], prior_spec) for p in base]
    moved = [p.replace(mu=p.mu + c) for p in base]
    diffs_shifted = [
        log_posterior(shifted, p, prior_spec) - log_posterior(shifted, moved[0], prior_spec) for p in moved
    ]
    np.testing.assert_allclose(diffs_shifted, diffs, atol=1e-9)
