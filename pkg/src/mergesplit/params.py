"""Algebraic relations among the self-similar exponents.

For a tail exponent ``alpha`` in (0, 1) the dilation rate is

    beta = (1 - alpha) / (alpha (1 + alpha))

and the large-argument exponent ``alpha_hat`` of ``1 - u`` is the root in
(0, 1/3] of ``beta * a * (1 - a) = 1 - 3 a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import DomainError


def beta_of_alpha(alpha: float) -> float:
    """Dilation rate of the self-similar solution with tail exponent `alpha`."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return (1.0 - alpha) / (alpha * (1.0 + alpha))


def _alphahat_equation(a: float, beta: float) -> float:
    # beta a^2 - (beta + 3) a + 1; positive at 0, nonpositive at 1/3
    return (beta * a - (beta + 3.0)) * a + 1.0


def alphahat_of_beta(beta: float, tol: float = 1e-14) -> float:
    """Small-size exponent ``alpha_hat`` for dilation rate `beta`.

    Bisection on (0, 1/3] followed by one Newton polish. The quadratic's
    second root is larger than one and is never bracketed.
    """
    if not beta >= 0.0 or math.isinf(beta):
        raise DomainError(f"beta must be a finite nonnegative number, got {beta!r}")
    if beta == 0.0:
        return 1.0 / 3.0
    lo, hi = 0.0, 1.0 / 3.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _alphahat_equation(mid, beta) > 0.0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    slope = 2.0 * beta * a - (beta + 3.0)
    a -= _alphahat_equation(a, beta) / slope
    return min(max(a, 0.0), 1.0 / 3.0)


def alpha_of_beta(beta: float) -> float:
    """Inverse of :func:`beta_of_alpha` (positive root of beta a^2 + (beta+1) a - 1)."""
    if not beta > 0.0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    b = beta + 1.0
    # rationalized root avoids cancellation for large beta
    return 2.0 / (b + math.sqrt(b * b + 4.0 * beta))


def beta_of_alphahat(alpha_hat: float) -> float:
    """Dilation rate implied by the small-size exponent."""
    if not 0.0 < alpha_hat <= 1.0 / 3.0:
        raise DomainError(f"alpha_hat must lie in (0, 1/3], got {alpha_hat!r}")
    return (1.0 - 3.0 * alpha_hat) / (alpha_hat * (1.0 - alpha_hat))


@dataclass(frozen=True)
class ProfileParams:
    """Exponents of one member of the self-similar family.

    ``c_hat`` stays ``None`` until a tail fit supplies it; ``lam`` is the
    dilation parameter fixing the size scale (``lambda`` is reserved).
    """

    alpha: float
    beta: float
    alpha_hat: float
    c_hat: Optional[float] = None
    lam: float = 1.0

    @classmethod
    def from_alpha(cls, alpha: float, lam: float = 1.0) -> "ProfileParams":
        if not lam > 0.0:
            raise DomainError(f"lambda must be positive, got {lam!r}")
        beta = beta_of_alpha(alpha)
        return cls(alpha=alpha, beta=beta, alpha_hat=alphahat_of_beta(beta), lam=lam)

    def with_c_hat(self, c_hat: float) -> "ProfileParams":
        return replace(self, c_hat=c_hat)

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "alpha_hat": self.alpha_hat,
            "c_hat": self.c_hat,
            "lambda": self.lam,
        }


def eigen_residuals(params: ProfileParams) -> tuple[float, float]:
    """Determinants of the two linearizations; both vanish for consistent params.

    The first belongs to the saddle at the origin (eigenvalue ``alpha``), the
    second to the node at (1, 1) (eigenvalue ``-alpha_hat``).
    """
    a, b, ah = params.alpha, params.beta, params.alpha_hat
    d_origin = (-1.0 - b * a) * (-1.0 - a) - 2.0
    d_node = (-3.0 + b * ah) * (-1.0 + ah) - 2.0
    return d_origin, d_node
