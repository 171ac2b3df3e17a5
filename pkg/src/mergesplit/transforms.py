"""Physical-space reconstruction of the self-similar size distribution.

Real-axis Laplace inversion (Gaver-Stehfest) turns ``1 - u_alpha`` into the
density ``f`` and ``1 - V_alpha`` (with ``V_alpha(w) = u_alpha(w**(1/alpha))``)
into the companion density ``g``. The two are linked by subordination to the
one-sided stable law with Laplace transform ``exp(-q**alpha)``, which gives a
second route to ``f``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma, gammaln

from .errors import (
    DomainError,
    FitError,
    OscillationError,
    PrecisionError,
    TailTruncationWarning,
)

__all__ = [
    "DensitySample",
    "StableKernel",
    "TailFit",
    "CMProbeReport",
    "stehfest_weights",
    "invert_laplace",
    "invert_profile",
    "invert_companion",
    "companion_grid",
    "stable_density",
    "subordinate",
    "tail_exponent_fit",
    "karamata_prefactors",
    "bernstein_of_density",
    "cm_probe",
    "density_mass",
    "predicted_end_masses",
]

DEFAULT_ORDERS = (8, 10, 12, 14, 16, 18)


@dataclass(frozen=True)
class DensitySample:
    """Density samples on a geometric grid and the route that produced them."""

    x_grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    provenance: str
    alpha: float
    order: Optional[int] = None

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2 or np.any(np.diff(x) <= 0) or x[0] <= 0:
            raise DomainError("x_grid must be increasing, positive and match values")
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "values", v)

    def rows(self):
        return [(float(a), float(b), self.provenance) for a, b in zip(self.x_grid, self.values)]


@lru_cache(maxsize=None)
def _exact_weights(order: int) -> tuple[Fraction, ...]:
    if order < 2 or order % 2:
        raise DomainError(f"Stehfest order must be even and >= 2, got {order}")
    h = order // 2
    f = math.factorial
    out = []
    for k in range(1, order + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, h) + 1):
            acc += Fraction(j**h * f(2 * j), f(h - j) * f(j) * f(j - 1) * f(k - j) * f(2 * j - k))
        out.append((-1) ** (k + h) * acc)
    return tuple(out)


def stehfest_weights(order: int) -> np.ndarray:
    """Gaver-Stehfest weights ``V_1..V_order`` (computed exactly, then rounded)."""
    return np.array([float(w) for w in _exact_weights(order)])


def _invert_fixed(transform: Callable, x: np.ndarray, order: int) -> np.ndarray:
    ln2 = math.log(2.0)
    k = np.arange(1, order + 1)
    arg = np.outer(ln2 / x, k)
    vals = np.asarray(transform(arg.ravel()), dtype=float).reshape(arg.shape)
    return ln2 / x * (vals @ stehfest_weights(order))


def _invert_mp(transform: Callable, x: np.ndarray, order: int, dps: int) -> np.ndarray:
    import mpmath

    with mpmath.workdps(dps):
        weights = [mpmath.mpf(w.numerator) / w.denominator for w in _exact_weights(order)]
        ln2 = mpmath.log(2)
        out = []
        for xi in x:
            lam = ln2 / mpmath.mpf(float(xi))
            out.append(float(lam * mpmath.fsum(w * transform(lam * k) for k, w in enumerate(weights, 1))))
    return np.array(out)


def invert_laplace(
    transform: Callable,
    x,
    order: Optional[int] = None,
    orders: Sequence[int] = DEFAULT_ORDERS,
    dps: Optional[int] = None,
) -> tuple[np.ndarray, int]:
    """Invert a Laplace transform known on the positive real axis.

    With ``order=None`` every order in `orders` is tried and the one whose
    result agrees best (max relative change over the grid) with the next
    lower order is returned. Double-precision transforms limit useful orders
    to about 18; passing `dps` evaluates `transform` on mpmath numbers at that
    working precision, where much higher orders pay off.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0.0):
        raise DomainError("inversion points must be positive")
    if dps is not None:
        order = order or max(orders)
        return _invert_mp(transform, x, order, dps), order
    if order is not None:
        return _invert_fixed(transform, x, order), order
    orders = sorted(orders)
    if len(orders) < 2:
        raise DomainError("need at least two orders to compare")
    prev = _invert_fixed(transform, x, orders[0])
    best, best_order, best_change = None, None, math.inf
    for m in orders[1:]:
        cur = _invert_fixed(transform, x, m)
        scale = np.maximum(np.abs(cur), 1e-300)
        change = float(np.max(np.abs(cur - prev) / scale))
        if change < best_change:
            best, best_order, best_change = cur, m, change
        prev = cur
    return best, best_order


def _check_monotone(values: np.ndarray, rel_tol: float, what: str) -> None:
    if np.any(values <= 0.0):
        raise OscillationError(f"{what}: nonpositive inversion output")
    rise = np.diff(values) / values[1:]
    if np.any(rise > rel_tol):
        k = int(np.argmax(rise))
        raise OscillationError(f"{what}: increases by {rise[k]:.2e} relative at index {k}")


def invert_profile(curve, x_grid, order: Optional[int] = None, monotone_tol: float = 1e-4) -> DensitySample:
    """Density ``f`` whose Laplace transform is ``1 - u(z)``."""
    x = np.asarray(x_grid, dtype=float)
    vals, used = invert_laplace(curve.gap, x, order)
    _check_monotone(vals, monotone_tol, "inverted profile")
    return DensitySample(x, vals, "inversion", curve.alpha, used)


def invert_companion(curve, tau_grid, order: Optional[int] = None, monotone_tol: float = 1e-4) -> DensitySample:
    """Density ``g`` whose Laplace transform is ``1 - u(w**(1/alpha))``."""
    tau = np.asarray(tau_grid, dtype=float)
    inv_a = 1.0 / curve.alpha

    def gap_v(w):
        return curve.gap(np.asarray(w, dtype=float) ** inv_a)

    vals, used = invert_laplace(gap_v, tau, order)
    _check_monotone(vals, monotone_tol, "inverted companion")
    return DensitySample(tau, vals, "companion-inversion", curve.alpha, used)


def companion_grid(curve, tau_min: float = 1e-10, per_decade: int = 80, floor: float = 1e-4) -> np.ndarray:
    """Geometric grid for ``g`` ending where ``g`` falls below `floor` times ``g(1)``.

    Beyond that point the inversion is dominated by noise of the transform,
    and the subordination integral continues ``g`` by a fitted tail instead.
    """
    probe = np.geomspace(1.0, 1e4, 49)
    vals, _ = invert_laplace(lambda w: curve.gap(np.asarray(w, dtype=float) ** (1.0 / curve.alpha)), probe, 12)
    below = np.nonzero(vals < floor * vals[0])[0]
    tau_max = float(probe[below[0]]) if below.size else float(probe[-1])
    n = int(round(per_decade * math.log10(tau_max / tau_min)))
    return np.geomspace(tau_min, tau_max, n + 1)


@lru_cache(maxsize=8)
def _kanter_nodes(n: int = 400):
    # Gauss-Legendre on (0, pi)
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * math.pi * (t + 1.0), 0.5 * math.pi * w


@dataclass(frozen=True)
class StableKernel:
    """One-sided stable density with Laplace transform ``exp(-q**alpha)``.

    Above ``series_cutoff`` the density is summed from its convergent series
    in ``x**-alpha``; below it, from the integral representation over
    ``(0, pi)`` (Kanter's form), where the series loses too many digits.
    ``None`` picks the cutoff where the series keeps ~12 digits.
    """

    alpha: float
    series_cutoff: Optional[float] = None
    max_terms: int = 400
    precision_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.series_cutoff is None:
            object.__setattr__(self, "series_cutoff", self._auto_cutoff())

    @property
    def tail_prefactor(self) -> float:
        """Limit of ``p(x) x**(1 + alpha)``: ``Gamma(1 + alpha) sin(pi alpha) / pi``."""
        return gamma(1.0 + self.alpha) * math.sin(math.pi * self.alpha) / math.pi

    def _terms(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # terms scaled by exp(-shift) per row, to survive huge intermediate terms
        a = self.alpha
        k = np.arange(1, self.max_terms + 1, dtype=float)
        # log |Gamma(k a + 1) / k! x^{-a k}|
        logmag = gammaln(k * a + 1.0) - gammaln(k + 1.0) - np.outer(a * np.log(x), k)
        shift = logmag.max(axis=1)
        sign = (-1.0) ** k * np.sin(k * math.pi * a)
        return -sign * np.exp(logmag - shift[:, None]), shift

    def cancellation(self, x) -> np.ndarray:
        """``sum |terms| / |sum|``: the factor by which rounding is amplified."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t, _ = self._terms(x)
        with np.errstate(divide="ignore"):
            return np.abs(t).sum(axis=1) / np.abs(t.sum(axis=1))

    def _auto_cutoff(self) -> float:
        lo, hi = -8.0, 2.0

        def ok(e):
            t, _ = self._terms(np.array([10.0**e]))
            total = abs(t.sum())
            converged = abs(t[0, -1]) <= 1e-17 * total
            return converged and np.abs(t).sum() * 1e-16 < 1e-12 * total

        if ok(lo):
            return 10.0**lo
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return 10.0**hi

    def series(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t, shift = self._terms(x)
        total = t.sum(axis=1)
        with np.errstate(divide="ignore"):
            amp = np.abs(t).sum(axis=1) / np.abs(total)
        if np.any(amp * 1e-16 > self.precision_tol):
            raise PrecisionError(
                f"series cancellation {amp.max():.2e} loses more than {self.precision_tol:g} relative; raise the cutoff"
            )
        if np.any(np.abs(t[:, -1]) > 1e-17 * np.abs(total)):
            raise PrecisionError("series not converged within max_terms")
        return total * np.exp(shift) / (math.pi * x)

    def integral(self, x, n_nodes: int = 400) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a = self.alpha
        phi, w = _kanter_nodes(n_nodes)
        e = 1.0 / (1.0 - a)
        amp = (np.sin(a * phi) ** a * np.sin((1.0 - a) * phi) ** (1.0 - a) / np.sin(phi)) ** e
        z = x ** (-a * e)
        expo = np.exp(-np.outer(z, amp))
        return (a * e / math.pi) * x ** (-e) * ((expo * amp) @ w)

    def __call__(self, x) -> np.ndarray:
        x_arr = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x_arr).ravel()
        if np.any(flat <= 0.0):
            raise DomainError("stable density is evaluated at x > 0 only")
        out = np.empty_like(flat)
        hi = flat >= self.series_cutoff
        if hi.any():
            out[hi] = self.series(flat[hi])
        if (~hi).any():
            out[~hi] = self.integral(flat[~hi])
        out = out.reshape(np.shape(x_arr))
        return out if out.ndim else float(out)

    def tail_mass(self, x: float) -> float:
        """``int_x^inf p`` summed termwise from the series (valid above the cutoff)."""
        if x < self.series_cutoff:
            raise DomainError("tail mass needs x above the series cutoff")
        a = self.alpha
        k = np.arange(1, self.max_terms + 1, dtype=float)
        logmag = gammaln(k * a + 1.0) - gammaln(k + 1.0) - k * a * math.log(x) - np.log(k * a)
        sign = (-1.0) ** k * np.sin(k * math.pi * a)
        return float(np.sum(-sign * np.exp(logmag)) / math.pi)

    def normalization(self) -> float:
        """``int_0^inf p`` by quadrature in ``log x`` plus the series tail."""
        a = self.alpha
        upper = max(1e4, self.series_cutoff)
        # below x_lo the density is under exp(-40) times its scale
        c = (1.0 - a) * a ** (a / (1.0 - a))
        log_lo = -(1.0 - a) / a * math.log(40.0 / c)
        val, _ = integrate.quad(
            lambda t: float(self(math.exp(t))) * math.exp(t), log_lo, math.log(upper), limit=400, epsrel=1e-12
        )
        return val + self.tail_mass(upper)


def stable_density(alpha: float, x) -> np.ndarray:
    """Convenience wrapper around :class:`StableKernel`."""
    return StableKernel(alpha)(x)


def _fit_power(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(math.exp(intercept))


def subordinate(
    g: DensitySample,
    kernel: StableKernel,
    x_grid,
    left_exponent: Optional[float] = None,
    warn_tol: float = 1e-4,
) -> DensitySample:
    """``f(x) = int g(tau) p(x tau**(-1/alpha)) tau**(-1/alpha) d tau``.

    Simpson's rule in ``log tau`` over the sample grid. Below the grid ``g`` is
    continued as ``A tau**(a - 1)`` (fitted from the first decade unless
    `left_exponent` gives ``a - 1``), with the kernel replaced by its tail
    ``c y**(-1-alpha)``. Beyond the grid ``g`` is continued by whichever of an
    exponential or a power law fits the last decade better.
    """
    if abs(kernel.alpha - g.alpha) > 1e-12:
        raise DomainError("kernel and sample belong to different alpha")
    a = kernel.alpha
    tau, gv = g.x_grid, g.values
    x = np.asarray(x_grid, dtype=float)
    if np.any(gv <= 0.0):
        raise DomainError("g must be positive")
    # integrand in log tau
    y = np.outer(x, tau ** (-1.0 / a))
    vals = kernel(y.ravel()).reshape(y.shape) * (gv * tau ** (1.0 - 1.0 / a))
    body = integrate.simpson(vals, x=np.log(tau), axis=1)

    head_mask = tau <= tau[0] * 10.0
    if left_exponent is None:
        slope, amp = _fit_power(tau[head_mask], gv[head_mask])
    else:
        slope = left_exponent
        amp = gv[0] / tau[0] ** slope
    t0 = tau[0]
    head = amp * kernel.tail_prefactor * x ** (-1.0 - a) * t0 ** (slope + 2.0) / (slope + 2.0)

    tail_mask = tau >= tau[-1] / 10.0
    tt, gt = tau[tail_mask], gv[tail_mask]
    exp_coef = np.polyfit(tt, np.log(gt), 1)
    pow_coef = np.polyfit(np.log(tt), np.log(gt), 1)
    exp_res = np.abs(np.polyval(exp_coef, tt) - np.log(gt)).max()
    pow_res = np.abs(np.polyval(pow_coef, np.log(tt)) - np.log(gt)).max()
    if exp_res <= pow_res:
        g_tail = lambda t: np.exp(np.polyval(exp_coef, t))
    else:
        g_tail = lambda t: np.exp(np.polyval(pow_coef, np.log(t)))
    t_end = tau[-1]
    tail = np.empty_like(x)
    for i, xi in enumerate(x):
        tail[i], _ = integrate.quad(
            lambda s: float(g_tail(t_end * math.exp(s)) * kernel(xi * (t_end * math.exp(s)) ** (-1.0 / a)))
            * (t_end * math.exp(s)) ** (1.0 - 1.0 / a),
            0.0,
            30.0,
            limit=200,
        )
    total = body + head + tail
    share = (np.abs(head) + np.abs(tail)) / total
    if np.any(share > warn_tol):
        warnings.warn(
            f"endpoint contributions reach {share.max():.2e} of the integral", TailTruncationWarning, stacklevel=2
        )
    return DensitySample(x, total, "subordination", a, g.order)


@dataclass(frozen=True)
class TailFit:
    exponent: float
    amplitude: float
    decades: float


def tail_exponent_fit(x, y, window: Optional[tuple[float, float]] = None, min_decades: float = 2.0) -> TailFit:
    """Least-squares fit of ``y = amplitude * x**exponent`` in log-log space."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        keep = (x >= window[0]) & (x <= window[1])
        x, y = x[keep], y[keep]
    if x.size < 3 or np.any(x <= 0) or np.any(y <= 0):
        raise FitError("need at least three positive samples")
    decades = float(math.log10(x.max() / x.min()))
    if decades < min_decades - 1e-9:
        raise FitError(f"fit window spans {decades:.2f} decades, need {min_decades}")
    slope, amp = _fit_power(x, y)
    return TailFit(slope, amp, decades)


def karamata_prefactors(amplitude: float, alpha: float) -> dict:
    """Prefactors along the chain for a density ``A x**(-1-alpha)``.

    ``dF/ds ~ A Gamma(2-alpha)/(1-alpha) s**(alpha-1)`` and
    ``F(s) ~ A Gamma(2-alpha)/(alpha (1-alpha)) s**alpha`` for the Bernstein
    transform ``F``; the partial first moment grows like
    ``A x**(1-alpha)/(1-alpha)``.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    g2 = gamma(2.0 - alpha)
    return {
        "density": amplitude,
        "first_moment": amplitude / (1.0 - alpha),
        "derivative": amplitude * g2 / (1.0 - alpha),
        "transform": amplitude * g2 / (alpha * (1.0 - alpha)),
    }


def bernstein_of_density(density: Callable, s, lower: float = 0.0) -> np.ndarray:
    """``int (1 - e^{-s x}) density(x) dx`` by adaptive quadrature in ``log x``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s)
    for i, si in enumerate(s):
        # scaled variable x = t / s keeps the kernel's bend at t ~ 1
        f = lambda lt: float(-math.expm1(-math.exp(lt)) * density(math.exp(lt) / si) * math.exp(lt) / si)
        lo = -60.0 if lower == 0.0 else math.log(lower * si)
        val = 0.0
        # heavy tails decay like x**-alpha, so the log range must reach far out
        for a, b in ((lo, -5.0), (-5.0, 5.0), (5.0, 60.0), (60.0, 600.0)):
            if b > lo:
                part, _ = integrate.quad(f, max(a, lo), b, limit=200, epsabs=0.0, epsrel=1e-12)
                val += part
        out[i] = val
    return out


@dataclass(frozen=True)
class CMProbeReport:
    worst: float
    depth: int
    index: int
    tol: float

    @property
    def ok(self) -> bool:
        return self.worst <= self.tol


def cm_probe(sample: DensitySample, depth: int = 3, tol: float = 1e-4) -> CMProbeReport:
    """Sign alternation of divided differences up to `depth`.

    A completely monotone function has ``(-1)**k D^k >= 0`` for divided
    differences on any nodes. Violations are measured relative to the sum of
    absolute contributions, so rounding alone stays near machine precision.
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    x = sample.x_grid
    d = sample.values.copy()
    mag = np.abs(d)
    worst, worst_k, worst_i = 0.0, 0, -1
    for k in range(1, depth + 1):
        span = x[k:] - x[:-k]
        d = (d[1:] - d[:-1]) / span
        mag = (mag[1:] + mag[:-1]) / span
        viol = np.maximum(0.0, -((-1.0) ** k) * d) / mag
        i = int(np.argmax(viol))
        if viol[i] > worst:
            worst, worst_k, worst_i = float(viol[i]), k, i
    return CMProbeReport(worst, worst_k, worst_i, tol)


def density_mass(sample: DensitySample) -> float:
    """Trapezoid integral of the samples in ``log x``."""
    return float(integrate.trapezoid(sample.values * sample.x_grid, np.log(sample.x_grid)))


def predicted_end_masses(params, x_lo: float, x_hi: float) -> tuple[float, float]:
    """Mass below `x_lo` and above `x_hi` from the two power-law ends of ``f``.

    ``c_hat x**alpha_hat / Gamma(1 + alpha_hat)`` near zero and
    ``x**(-alpha) / Gamma(1 - alpha)`` at infinity.
    """
    if params.c_hat is None:
        raise DomainError("params need a fitted c_hat")
    ah, a = params.alpha_hat, params.alpha
    head = params.c_hat * x_lo**ah / gamma(1.0 + ah)
    tail = x_hi**-a / gamma(1.0 - a)
    return float(head), float(tail)
