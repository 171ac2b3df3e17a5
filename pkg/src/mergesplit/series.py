"""Fractional power series of the self-similar profile near the origin.

With ``w = z**alpha`` the profile is ``u(z) = sum_{n>=1} (-1)**(n-1) c_n w**n``
where ``c_1 = 1`` and, for ``n >= 2``,

    a_n c_n = sum_{k=1}^{n-1} c_k c_{n-k},
    a_n     = beta * alpha * n + 1 - 2 / (alpha * n + 1).

The coefficients grow like ``R**(-n)`` with ``R`` the radius of convergence in
``w``. They are stored scaled, ``d_n = c_n * scale**(n-1)`` with ``scale``
close to ``R``, so several thousand terms fit in double precision.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConvergenceError, DomainError, InstabilityError

__all__ = [
    "SeriesData",
    "CMReport",
    "SeriesTruncationWarning",
    "RadiusBoundWarning",
    "denominators",
    "coefficients",
    "eval_series",
    "eval_series_dw",
    "eval_series_average",
    "series_residual",
    "radius_estimate",
    "ratio_diagnostics",
    "gamma_star_cm_check",
    "fuss_catalan",
    "exact_coefficients",
]


class SeriesTruncationWarning(UserWarning):
    """The last retained term is not negligible against the partial sum."""


class RadiusBoundWarning(UserWarning):
    """The ratio-test radius fell outside the proven bounds and was clamped."""


def _beta(alpha: float) -> float:
    # alpha == 1 is the equilibrium limit (beta = 0), allowed only here
    return (1.0 - alpha) / (alpha * (1.0 + alpha))


def denominators(alpha: float, n_max: int) -> np.ndarray:
    """``a_1 .. a_{n_max}``; ``a_1 = 0`` exactly."""
    n = np.arange(1, n_max + 1, dtype=float)
    if alpha == 1.0:
        a = (n - 1.0) / (n + 1.0)
    else:
        # second form of a_n; avoids 1 - 2/(alpha n + 1) cancellation at n = 1
        a = (1.0 - alpha) / (1.0 + alpha) * n + (alpha * n - 1.0) / (alpha * n + 1.0)
    a[0] = 0.0
    return a


def _scaled_recursion(denoms: np.ndarray, scale: float) -> np.ndarray:
    n_max = denoms.size
    d = np.empty(n_max)
    d[0] = 1.0
    for m in range(1, n_max):
        # d_{m+1} = scale * sum_{k=1}^{m} d_k d_{m+1-k} / a_{m+1}
        conv = float(np.dot(d[:m], d[m - 1 :: -1]))
        d[m] = scale * conv / denoms[m]
        if not math.isfinite(d[m]):
            raise OverflowError(f"series coefficient overflow at n={m + 1}")
    return d


@dataclass(frozen=True)
class SeriesData:
    """Coefficients of the profile series for one ``alpha``.

    ``scaled[n-1] = c_n * scale**(n-1)``; ``gamma_star[n-1] =
    c_n * radius_est**(n-1)``.
    """

    alpha: float
    denoms: np.ndarray
    scaled: np.ndarray
    scale: float
    radius_est: float
    gamma_star: np.ndarray = field(repr=False)

    @property
    def n_max(self) -> int:
        return int(self.scaled.size)

    @property
    def coeffs(self) -> np.ndarray:
        """Unscaled ``c_1 .. c_N``; raises OverflowError naming the first bad n."""
        n = np.arange(self.n_max)
        with np.errstate(over="ignore"):
            c = self.scaled * self.scale ** (-n.astype(float))
        bad = ~np.isfinite(c)
        if bad.any():
            raise OverflowError(f"series coefficient c_n overflows at n={int(np.argmax(bad)) + 1}")
        return c

    def gamma_star_for(self, radius: float) -> np.ndarray:
        """``c_n * radius**(n-1)`` for an arbitrary trial radius."""
        n = np.arange(self.n_max, dtype=float)
        return self.scaled * np.exp(n * math.log(radius / self.scale))


def coefficients(alpha: float, n_max: int) -> SeriesData:
    """Series coefficients for ``alpha`` in (0, 1] up to ``n_max`` terms."""
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    if n_max < 1:
        raise DomainError(f"n_max must be at least 1, got {n_max!r}")
    denoms = denominators(alpha, n_max)
    if n_max == 1:
        one = np.ones(1)
        return SeriesData(alpha, denoms, one, 1.0, math.nan, one)

    a2 = denoms[1]
    # pilot pass scaled by the upper radius bound a_2, then rescale near R
    pilot = _scaled_recursion(denoms[: min(n_max, 64)], a2)
    if pilot.size >= 8:
        tail = pilot.size // 4
        ratios = a2 * pilot[-tail - 1 : -1] / pilot[-tail:]
        scale = float(min(a2, ratios.mean()))
    else:
        scale = float(a2)
    scaled = _scaled_recursion(denoms, scale)

    data = SeriesData(alpha, denoms, scaled, scale, math.nan, scaled)
    if n_max >= 20:
        radius = radius_estimate(data, strict=False)
    else:
        radius = scale
    gamma = data.gamma_star_for(radius)
    return SeriesData(alpha, denoms, scaled, scale, radius, gamma)


def exact_coefficients(alpha, n_max: int) -> list[Fraction]:
    """The recursion in rational arithmetic for rational ``alpha`` in (0, 1].

    Denominators grow quickly, so this is meant for small `n_max`.
    """
    alpha = Fraction(alpha)
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    beta = (1 - alpha) / (alpha * (1 + alpha))
    c = [Fraction(1)]
    for n in range(2, n_max + 1):
        a_n = beta * alpha * n + 1 - Fraction(2) / (alpha * n + 1)
        c.append(sum(c[k] * c[n - 2 - k] for k in range(n - 1)) / a_n)
    return c


def _ratios(data: SeriesData) -> tuple[np.ndarray, np.ndarray]:
    """Last-quartile ratios ``c_n / c_{n+1}`` and their indices n."""
    d = data.scaled
    q = max(data.n_max // 4, 2)
    n = np.arange(data.n_max - q, data.n_max)  # n of c_{n} in the pairs (c_n, c_{n+1})
    r = data.scale * d[n - 1] / d[n]
    return n.astype(float), r


def radius_estimate(data: SeriesData, *, strict: bool = True) -> float:
    """Ratio-test radius averaged over the last quartile of coefficients.

    Raises :class:`InstabilityError` when the quartile's ratios spread by
    more than 1% (only if `strict`). Estimates outside
    ``[(1-alpha)/(1+alpha), a_2]`` are clamped with a warning.
    """
    if data.n_max < 20:
        raise DomainError("radius estimation needs at least 20 coefficients")
    _, r = _ratios(data)
    est = float(r.mean())
    spread = float((r.max() - r.min()) / est)
    if strict and spread > 0.01:
        raise InstabilityError(
            f"ratio test unstable: last-quartile ratios spread {spread:.3%} (alpha={data.alpha})"
        )
    lo = (1.0 - data.alpha) / (1.0 + data.alpha)
    hi = float(data.denoms[1])
    if est < lo or est > hi:
        warnings.warn(
            f"radius estimate {est:.6g} outside [{lo:.6g}, {hi:.6g}]; clamped",
            RadiusBoundWarning,
            stacklevel=2,
        )
        est = min(max(est, lo), hi)
    return est


def ratio_diagnostics(data: SeriesData) -> dict:
    """Convergence behaviour of the ratio test over the last quartile.

    Fits ``c_n / c_{n+1} = R (1 + b / n)``. A simple pole at the radius makes
    the ratios converge geometrically (``b`` near zero); an algebraic branch
    point ``(1 - w/R)**(-p)`` gives ``b = 1 - p``.
    The extrapolated ``R`` is reported next to the plain average.
    """
    n, r = _ratios(data)
    slope, intercept = np.polyfit(1.0 / n, r, 1)
    return {
        "alpha": data.alpha,
        "mean_ratio": float(r.mean()),
        "spread": float((r.max() - r.min()) / r.mean()),
        "extrapolated_radius": float(intercept),
        "one_over_n_coefficient": float(slope / intercept),
        "last_step_change": float(abs(r[-1] - r[-2]) / r[-1]),
    }


def eval_series(data: SeriesData, z, *, return_error: bool = False, warn_tol: float = 1e-10):
    """Sum the alternating series at ``z > 0`` (scalar or array).

    The truncation error is estimated by the magnitude of the last retained
    term. Requires ``z**alpha < radius_est``.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0):
        raise DomainError("series is defined for z >= 0 only")
    w = z ** data.alpha
    if np.any(w >= data.radius_est):
        raise ConvergenceError(
            f"z**alpha={float(np.max(w)):.6g} outside the convergence radius {data.radius_est:.6g}"
        )
    q = -w / data.scale
    acc = np.zeros_like(w)
    for dn in data.scaled[::-1]:
        acc = acc * q + dn
    value = w * acc
    last = np.abs(w * data.scaled[-1] * (w / data.scale) ** (data.n_max - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(value > 0.0, last / np.abs(value), 0.0)
    if np.any(rel > warn_tol):
        warnings.warn(
            f"series truncation: last term / sum = {float(np.max(rel)):.3g}",
            SeriesTruncationWarning,
            stacklevel=2,
        )
    if value.ndim == 0:
        value, last = float(value), float(last)
    if return_error:
        return value, last
    return value


def eval_series_dw(data: SeriesData, w):
    """Derivative of the series with respect to ``w = z**alpha``."""
    w = np.asarray(w, dtype=float)
    q = -w / data.scale
    n = np.arange(1, data.n_max + 1, dtype=float)
    acc = np.zeros_like(w)
    for dn, k in zip(data.scaled[::-1], n[::-1]):
        acc = acc * q + k * dn
    return acc


def eval_series_average(data: SeriesData, z):
    """Series for ``v(z) = int_0^1 u(z r) dr``: the ``n``-th term gains ``1/(alpha n + 1)``."""
    z = np.asarray(z, dtype=float)
    w = z**data.alpha
    if np.any(w >= data.radius_est):
        raise ConvergenceError("z**alpha outside the convergence radius")
    q = -w / data.scale
    n = np.arange(1, data.n_max + 1, dtype=float)
    acc = np.zeros_like(w)
    for dn, k in zip(data.scaled[::-1], n[::-1]):
        acc = acc * q + dn / (data.alpha * k + 1.0)
    return w * acc


def series_residual(data: SeriesData, z, n_terms: int | None = None):
    """Residual of the profile equation for the series truncated at `n_terms`.

    Evaluates ``beta z u' + u^2 + u - 2 int_0^1 u(z r) dr`` termwise: a power
    ``w**n`` maps to ``alpha n w**n`` under ``z d/dz`` and to
    ``w**n / (alpha n + 1)`` under the average.
    """
    alpha = data.alpha
    beta = _beta(alpha)
    n_terms = data.n_max if n_terms is None else n_terms
    z = np.asarray(z, dtype=float)
    w = z**alpha
    n = np.arange(1, n_terms + 1, dtype=float)
    c = data.coeffs[:n_terms]
    powers = w[..., None] ** n
    signed = (-1.0) ** (n - 1) * c * powers
    u = signed.sum(axis=-1)
    zu = (signed * alpha * n).sum(axis=-1)
    avg = (signed / (alpha * n + 1.0)).sum(axis=-1)
    return beta * zu + u * u + u - 2.0 * avg


@dataclass(frozen=True)
class CMReport:
    """Worst sign violation among the finite differences of a sequence."""

    worst: float
    k: int
    j: int
    depth: int
    tol: float

    @property
    def ok(self) -> bool:
        return self.worst <= self.tol


def cm_differences(seq: np.ndarray, depth: int, tol: float = 1e-9) -> CMReport:
    """Check ``(-1)**k (Delta**k seq)_j >= -tol`` for ``k <= depth``."""
    worst, wk, wj = 0.0, 0, 0
    diff = np.asarray(seq, dtype=float)
    for k in range(depth + 1):
        if k:
            diff = np.diff(diff)
        if diff.size == 0:
            break
        signed = (-1.0) ** k * diff
        j = int(np.argmin(signed))
        if -signed[j] > worst:
            worst, wk, wj = float(-signed[j]), k, j
    return CMReport(worst=worst, k=wk, j=wj, depth=depth, tol=tol)


def gamma_star_cm_check(
    data: SeriesData, depth: int, radius: float | None = None, tol: float = 1e-9
) -> CMReport:
    """Complete-monotonicity diagnostic for ``gamma*_n = c_{n+1} R**n``.

    `radius` defaults to the ratio-test estimate; because that estimate is
    inexact, violations are reported rather than raised.
    """
    if depth > data.n_max // 2:
        raise DomainError(f"depth {depth} exceeds n_max/2 = {data.n_max // 2}")
    gamma = data.gamma_star if radius is None else data.gamma_star_for(radius)
    return cm_differences(gamma, depth, tol)


def fuss_catalan(n: int, p: int = 3, r: int = 1) -> int:
    """Exact ``A_n(p, r) = r/(p n + r) * binom(p n + r, n)``."""
    top = p * n + r
    num = r * math.comb(top, n)
    q, rem = divmod(num, top)
    if rem:
        raise ArithmeticError("Fuss-Catalan quotient is not integral")
    return q
