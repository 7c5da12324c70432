"""Objective Bayesian inference for the asymmetric Student-t model."""

__version__ = "0.1.0"

from .ast_core import (
    NU_MAX,
    ASTParams,
    DescriptiveStats,
    Sample,
    ast_log_likelihood,
    ast_log_pdf,
    ast_pdf,
    ast_sample,
    descriptive_stats,
)
from .errors import ChainError, DiagnosticsError, DomainError, InputError, NumericalError
from .nu_prior import NuPriorTable, build_prior_table, default_prior_table, kl_divergence, log_prior_nu
from .priors import JointPriorSpec, log_joint_prior, log_posterior
from .sampler import SamplerConfig, Trace, run_chain, run_chains
from .diagnostics import PosteriorSummary, PredictiveDensity, gelman_rubin, posterior_predictive, running_mean, summarize
