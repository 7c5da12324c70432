"""Joint objective prior and unnormalized log posterior for the AST model.

Prior: the tabulated loss-based prior on ``nu``, Beta(1/2, 1/2) on
``alpha`` and the reference prior ``1/sigma`` on ``(mu, sigma)``.  The
latter is improper, so additive constants are dropped and every value
here is meaningful only in differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .ast_core import ASTParams, ast_log_likelihood
from .errors import DomainError
from .nu_prior import NuPriorTable, default_prior_table

BETA_A = 0.5
BETA_B = 0.5


def log_beta_pdf(x, a, b):
    """Log density of Beta(a, b) at ``x`` in (0, 1)."""
    if not 0.0 < x < 1.0:
        raise DomainError(f"Beta density needs x in (0, 1), got {x!r}")
    return (
        (a - 1.0) * math.log(x)
        + (b - 1.0) * math.log1p(-x)
        - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    )


@dataclass(frozen=True)
class JointPriorSpec:
    nu_table: NuPriorTable = field(default_factory=default_prior_table)
    alpha_a: float = BETA_A
    alpha_b: float = BETA_B

    def __post_init__(self):
        if (self.alpha_a, self.alpha_b) != (BETA_A, BETA_B):
            raise DomainError("the prior on alpha is fixed at Beta(1/2, 1/2)")


def log_alpha_prior(alpha: float) -> float:
    return log_beta_pdf(alpha, BETA_A, BETA_B)


def log_joint_prior(p: ASTParams, spec: JointPriorSpec | None = None) -> float:
    """``log pi(nu) + log Beta(alpha; 1/2, 1/2) - log sigma``."""
    if spec is None:
        spec = JointPriorSpec()
    return math.log(spec.nu_table.mass(p.nu)) + log_alpha_prior(p.alpha) - math.log(p.sigma)


def log_posterior(s, p: ASTParams, spec: JointPriorSpec | None = None) -> float:
    """Log likelihood plus log joint prior, up to an additive constant."""
    return ast_log_likelihood(s, p) + log_joint_prior(p, spec)
