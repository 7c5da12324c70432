"""Loss-based objective prior over the AST degrees of freedom.

Each ``nu`` in ``1..30`` gets mass proportional to ``exp(D) - 1`` where ``D``
is the Kullback-Leibler divergence from the model at ``nu`` to its nearest
neighbour: the model at ``nu + 1`` for ``nu <= 28``, the model at ``nu - 1``
for ``nu`` in ``{29, 30}``.  ``nu = 30`` is the skewed normal endpoint.

The neighbour divergence does not depend on ``alpha``, ``mu`` or ``sigma``
(rescaling each half-line separately maps the integrals onto the symmetric
standard case), so the table is computed once at ``(0.5, 0, 1)`` and shared.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .ast_core import LOG_K_TABLE, NU_MAX, ASTParams, _check_nu
from .errors import DomainError, NumericalError

DEFAULT_QUAD_TOL = 1e-9
CANONICAL = (0.5, 0.0, 1.0)


def _log_pdf_scalar(x, alpha, nu, mu, sigma):
    d = x - mu
    scale = 2.0 * alpha * sigma if d <= 0.0 else 2.0 * (1.0 - alpha) * sigma
    z = d / scale
    if nu == NU_MAX:
        kernel = -0.5 * z * z
    else:
        kernel = -0.5 * (nu + 1) * math.log1p(z * z / nu)
    return LOG_K_TABLE[nu] - math.log(sigma) + kernel


def _kl_integrand(p: ASTParams, q: ASTParams):
    pa, qa = p.as_tuple(), q.as_tuple()

    def integrand(x):
        lf = _log_pdf_scalar(x, *pa)
        f = math.exp(lf)
        if f == 0.0:
            return 0.0
        return f * (lf - _log_pdf_scalar(x, *qa))

    return integrand


def _quad(fn, a, b, quad_tol):
    value, err = integrate.quad(fn, a, b, epsabs=quad_tol * 1e-2, epsrel=1e-12, limit=1000)
    if not err <= quad_tol:
        raise NumericalError(
            f"quadrature on ({a}, {b}) did not reach tolerance {quad_tol:g}", achieved=err
        )
    return value, err


def kl_divergence_split(p: ASTParams, q: ASTParams, quad_tol: float = DEFAULT_QUAD_TOL):
    """Return ``(D_left, D_right)``: the divergence integrated over ``x <= p.mu`` and ``x > p.mu``."""
    if p.mu != q.mu:
        raise DomainError("split divergence requires a common location")
    fn = _kl_integrand(p, q)
    left, _ = _quad(fn, -np.inf, p.mu, quad_tol / 2)
    right, _ = _quad(fn, p.mu, np.inf, quad_tol / 2)
    return left, right


def kl_divergence(p: ASTParams, q: ASTParams, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """Kullback-Leibler divergence ``D(f_p || f_q)`` by adaptive quadrature.

    The real line is split at the branch points of both densities and each
    piece is integrated separately; infinite pieces go through QUADPACK's
    ``(0, 1]`` mapping.  Raises :class:`NumericalError` if the reported
    error of any piece exceeds its share of ``quad_tol``.
    """
    if not quad_tol > 0:
        raise DomainError("quad_tol must be positive")
    fn = _kl_integrand(p, q)
    cuts = sorted({p.mu, q.mu})
    edges = [-np.inf, *cuts, np.inf]
    share = quad_tol / (len(edges) - 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += _quad(fn, a, b, share)[0]
    return max(total, 0.0)


def neighbour_of(nu: int) -> int:
    nu = _check_nu(nu)
    return nu + 1 if nu < NU_MAX - 1 else nu - 1


def neighbour_kl(nu: int, alpha=0.5, mu=0.0, sigma=1.0, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    p = ASTParams(alpha, nu, mu, sigma)
    return kl_divergence(p, p.replace(nu=neighbour_of(nu)), quad_tol)


@dataclass(frozen=True)
class NuPriorTable:
    """Normalized prior masses for ``nu = 1..30`` (index ``nu - 1``)."""

    masses: np.ndarray
    kl_neighbors: np.ndarray
    quad_tol: float

    def __post_init__(self):
        for name in ("masses", "kl_neighbors"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (NU_MAX,):
                raise DomainError(f"{name} must have {NU_MAX} entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def unnormalized(self) -> np.ndarray:
        return np.expm1(self.kl_neighbors)

    @property
    def log_masses(self) -> np.ndarray:
        return np.log(self.masses)

    def mass(self, nu: int) -> float:
        return float(self.masses[_check_nu(nu) - 1])


def build_prior_table(
    quad_tol: float = DEFAULT_QUAD_TOL, alpha=0.5, mu=0.0, sigma=1.0
) -> NuPriorTable:
    """Compute the neighbour divergences and normalized masses.

    ``alpha``, ``mu`` and ``sigma`` default to the canonical point; other
    values give the same table up to quadrature error.
    """
    if not (0 < quad_tol <= 1e-4):
        raise DomainError(f"quad_tol must lie in (0, 1e-4], got {quad_tol!r}")
    kl = np.array(
        [neighbour_kl(nu, alpha, mu, sigma, quad_tol) for nu in range(1, NU_MAX + 1)]
    )
    if not np.all(kl > 0):
        raise NumericalError("neighbour divergence is not strictly positive", achieved=quad_tol)
    forward = kl[: NU_MAX - 2]
    if not np.all(np.diff(forward) < 0):
        bad = int(np.argmax(np.diff(forward) >= 0)) + 1
        raise NumericalError(
            f"neighbour divergence is not decreasing at nu={bad}", achieved=quad_tol
        )
    unnorm = np.expm1(kl)
    return NuPriorTable(masses=unnorm / unnorm.sum(), kl_neighbors=kl, quad_tol=quad_tol)


@functools.lru_cache(maxsize=8)
def default_prior_table(quad_tol: float = DEFAULT_QUAD_TOL) -> NuPriorTable:
    """The table at the canonical point, computed once per tolerance."""
    return build_prior_table(quad_tol)


def log_prior_nu(nu: int, table: NuPriorTable | None = None) -> float:
    if table is None:
        table = default_prior_table()
    return math.log(table.mass(nu))
