"""Self-similar profile by shooting along the unstable manifold.

In ``tau = log z`` the pair ``(u, v)``, with ``v`` the running average of
``u``, solves the autonomous system

    beta du/dtau = -u - u**2 + 2 v
         dv/dtau =  u - v

The origin is a saddle whose unstable direction ``(1 + alpha, 1)`` has
eigenvalue ``alpha``; the trajectory leaving it along that direction ends at
the node (1, 1). Normalizing the free dilation against the power series fixes
``u(z) ~ z**alpha`` at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from . import series as ser
from .errors import ConvergenceError, DomainError, FitError, IntegrationError
from .params import ProfileParams

__all__ = [
    "ShootConfig",
    "ProfileCurve",
    "shoot",
    "normalize",
    "fit_tail",
    "residual",
    "residual_values",
    "build_profile",
]


@dataclass(frozen=True)
class ShootConfig:
    eps: float = 1e-8
    dtau: float = 1e-3
    rtol: float = 1e-12
    atol: float = 1e-20
    end_gap: float = 1e-10
    tau_max: float = 5000.0
    max_step: float = 0.5


def vector_field(u, v, beta: float):
    return (-u - u * u + 2.0 * v) / beta, u - v


@dataclass(frozen=True)
class ProfileCurve:
    """Sampled profile ``u`` and its running average ``v`` on a uniform tau grid.

    After :func:`normalize`, ``z = exp(tau_grid)`` and ``u(z) ~ z**alpha``;
    ``normalization_shift`` records the total tau offset applied.
    """

    params: ProfileParams
    tau_grid: np.ndarray = field(repr=False)
    u_values: np.ndarray = field(repr=False)
    v_values: np.ndarray = field(repr=False)
    u_gap: Optional[np.ndarray] = field(default=None, repr=False)
    v_gap: Optional[np.ndarray] = field(default=None, repr=False)
    c_hat_fit: Optional[float] = None
    normalization_shift: float = 0.0
    series: Optional[ser.SeriesData] = field(default=None, repr=False)
    normalized: bool = False

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def z_grid(self) -> np.ndarray:
        return np.exp(self.tau_grid)

    def du_dtau(self) -> np.ndarray:
        return vector_field(self.u_values, self.v_values, self.beta)[0]

    @property
    def gap_values(self) -> np.ndarray:
        """``1 - u`` on the grid, accurate in the relative sense near the node."""
        return 1.0 - self.u_values if self.u_gap is None else self.u_gap

    def _spline(self, which: str) -> CubicHermiteSpline:
        key = "_spline_" + which
        sp = self.__dict__.get(key)
        if sp is None:
            if which == "u":
                sp = CubicHermiteSpline(self.tau_grid, self.u_values, self.du_dtau())
            else:
                p = self.gap_values
                q = 1.0 - self.v_values if self.v_gap is None else self.v_gap
                sp = CubicHermiteSpline(self.tau_grid, p, _gap_field(p, q, self.beta)[0])
            object.__setattr__(self, key, sp)
        return sp

    def _tail_amplitude(self) -> float:
        # continuity with the last sample; asymptotically equal to c_hat
        return float(self.gap_values[-1] * math.exp(self.params.alpha_hat * self.tau_grid[-1]))

    def gap(self, z) -> np.ndarray:
        """``1 - u(z)`` without cancellation for large z."""
        if not self.normalized:
            raise DomainError("profile must be normalized before evaluation at arbitrary z")
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        tau = np.log(np.where(z > 0.0, z, 1.0))
        lo = z <= self.series_limit()
        hi = tau >= self.tau_grid[-1]
        mid = ~lo & ~hi
        if np.any(mid & (tau < self.tau_grid[0])):
            raise ConvergenceError("gap between the series window and the trajectory start")
        if lo.any():
            out[lo] = 1.0 - ser.eval_series(self.series, z[lo])
        if mid.any():
            out[mid] = self._spline("gap")(tau[mid])
        if hi.any():
            out[hi] = self._tail_amplitude() * np.exp(-self.params.alpha_hat * tau[hi])
        out[z == 0.0] = 1.0
        return out if out.ndim else float(out)

    def series_limit(self) -> float:
        """Largest ``z`` handed to the series (``z**alpha = radius/2``)."""
        if self.series is None:
            return 0.0
        return (0.5 * self.series.radius_est) ** (1.0 / self.alpha)

    def __call__(self, z) -> np.ndarray:
        """Evaluate ``u(z)`` for arbitrary ``z >= 0``.

        Series below ``z**alpha = R/2``, Hermite interpolation of the
        trajectory in between, ``1 - c z**(-alpha_hat)`` past its end.
        """
        if not self.normalized:
            raise DomainError("profile must be normalized before evaluation at arbitrary z")
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        zz = np.where(z > 0.0, z, 1.0)
        tau = np.log(zz)
        lo = z <= self.series_limit()
        hi = tau >= self.tau_grid[-1]
        mid = ~lo & ~hi
        if np.any(mid & (tau < self.tau_grid[0])):
            raise ConvergenceError("gap between the series window and the trajectory start")
        if lo.any():
            out[lo] = ser.eval_series(self.series, z[lo])
        if mid.any():
            out[mid] = self._spline("u")(tau[mid])
        if hi.any():
            out[hi] = 1.0 - self._tail_amplitude() * np.exp(-self.params.alpha_hat * tau[hi])
        out[z == 0.0] = 0.0
        return out if out.ndim else float(out)

    def dilated(self, factor: float):
        """``z -> u(factor * z)`` as a callable."""
        return lambda z: self(factor * np.asarray(z, dtype=float))


def _gap_field(p, q, beta: float):
    # (p, q) = (1 - u, 1 - v); keeps relative accuracy as the node is approached
    return (-3.0 * p + p * p + 2.0 * q) / beta, p - q


def shoot(alpha: float, config: ShootConfig = ShootConfig()) -> ProfileCurve:
    """Integrate the unstable manifold of the origin until ``1 - u < end_gap``.

    The first leg runs in ``(u, v)`` until ``u = 1/2``; the second in the gaps
    ``(1 - u, 1 - v)`` so that relative tolerances apply on both ends.
    """
    params = ProfileParams.from_alpha(alpha)
    beta = params.beta
    if config.eps > 1e-8:
        raise DomainError("start amplitude above 1e-8 leaves an O(eps) manifold error")
    direction = np.array([1.0 + alpha, 1.0])
    y0 = config.eps * direction / np.linalg.norm(direction)
    opts = dict(method="DOP853", rtol=config.rtol, atol=config.atol, max_step=config.max_step, dense_output=True)

    def rhs_near(_t, y):
        return list(vector_field(y[0], y[1], beta))

    def rhs_far(_t, y):
        return list(_gap_field(y[0], y[1], beta))

    def half_way(_t, y):
        return y[0] - 0.5

    half_way.terminal = True
    half_way.direction = 1

    def reached_end(_t, y):
        return y[0] - config.end_gap

    reached_end.terminal = True
    reached_end.direction = -1

    leg1 = solve_ivp(rhs_near, (0.0, config.tau_max), y0, events=half_way, **opts)
    if leg1.status != 1:
        raise IntegrationError(f"trajectory did not reach u = 1/2: {leg1.message}")
    _check_region(leg1.y[0], leg1.y[1], beta)
    tau_mid = float(leg1.t_events[0][0])
    mid = leg1.y_events[0][0]
    leg2 = solve_ivp(rhs_far, (tau_mid, config.tau_max), [1.0 - mid[0], 1.0 - mid[1]], events=reached_end, **opts)
    if leg2.status != 1:
        raise IntegrationError(f"trajectory did not reach 1 - u < {config.end_gap}: {leg2.message}")
    _check_gap_region(leg2.y[0], leg2.y[1], beta)

    tau_end = float(leg2.t_events[0][0])
    n = int(math.floor(tau_end / config.dtau)) + 1
    tau = np.arange(n) * config.dtau
    near = tau < tau_mid
    u = np.empty(n)
    v = np.empty(n)
    gu = np.empty(n)
    gv = np.empty(n)
    uv = leg1.sol(tau[near])
    u[near], v[near] = uv
    gu[near], gv[near] = 1.0 - uv[0], 1.0 - uv[1]
    pq = leg2.sol(tau[~near])
    gu[~near], gv[~near] = pq
    u[~near], v[~near] = 1.0 - pq[0], 1.0 - pq[1]
    return ProfileCurve(params=params, tau_grid=tau, u_values=u, v_values=v, u_gap=gu, v_gap=gv)


def _check_region(u: np.ndarray, v: np.ndarray, beta: float) -> None:
    lower = 0.5 * (u + u * u)
    inside = (lower < v) & (v < u) & (u < 1.0)
    if not inside.all():
        k = int(np.argmin(inside))
        raise IntegrationError(
            f"trajectory left the invariant region at step {k}: u={u[k]!r}, v={v[k]!r}"
        )
    du, dv = vector_field(u, v, beta)
    if np.any(du <= 0.0) or np.any(dv <= 0.0) or np.any(np.diff(u) <= 0.0):
        raise IntegrationError("trajectory stalled: u or v stopped increasing")


def _check_gap_region(p: np.ndarray, q: np.ndarray, beta: float) -> None:
    # p < q < 3p/2 - p^2/2 is the invariant region written in the gaps
    inside = (p < q) & (q < 1.5 * p - 0.5 * p * p) & (p > 0.0)
    if not inside.all():
        k = int(np.argmin(inside))
        raise IntegrationError(
            f"trajectory left the invariant region at step {k}: 1-u={p[k]!r}, 1-v={q[k]!r}"
        )
    dp, dq = _gap_field(p, q, beta)
    if np.any(dp >= 0.0) or np.any(dq >= 0.0) or np.any(np.diff(p) >= 0.0):
        raise IntegrationError("trajectory stalled: u or v stopped increasing")


def _series_window(curve: ProfileCurve, data: ser.SeriesData, shift: float) -> np.ndarray:
    w = np.exp(curve.alpha * (curve.tau_grid + shift))
    return (w <= 0.5 * data.radius_est) & (w >= 1e-4 * data.radius_est)


def normalize(curve: ProfileCurve, data: ser.SeriesData, max_iter: int = 50) -> ProfileCurve:
    """Shift tau so the trajectory matches the series on their common window.

    Gauss-Newton on the log-mismatch ``log S(e^{alpha (tau + s)}) - log u``
    over the samples with ``R*1e-4 <= z**alpha <= R/2``.
    """
    if abs(data.alpha - curve.alpha) > 1e-15:
        raise DomainError("series and curve belong to different alpha")
    alpha = curve.alpha
    if curve.normalized:
        shift = 0.0
    else:
        # leading order on the manifold: u ~ u0 exp(alpha tau) = (z e^{shift})**alpha
        shift = math.log(curve.u_values[0]) / alpha
    for _ in range(max_iter):
        mask = _series_window(curve, data, shift)
        if mask.sum() < 10:
            raise ConvergenceError(
                "no overlap between the trajectory and the series window; reduce eps"
            )
        w = np.exp(alpha * (curve.tau_grid[mask] + shift))
        s_val = ser.eval_series(data, w ** (1.0 / alpha))
        r = np.log(s_val) - np.log(curve.u_values[mask])
        jac = alpha * w * ser.eval_series_dw(data, w) / s_val
        step = -float(np.dot(jac, r) / np.dot(jac, jac))
        shift += step
        if abs(step) < 1e-15 * max(1.0, abs(shift)):
            break
    tau = curve.tau_grid + shift
    out = replace(
        curve,
        tau_grid=tau,
        normalization_shift=curve.normalization_shift + shift,
        series=data,
        normalized=True,
    )
    object.__setattr__(out, "_last_shift", shift)
    return out


def series_mismatch(curve: ProfileCurve) -> float:
    """Max relative gap between trajectory samples and the series on the overlap."""
    mask = _series_window(curve, curve.series, 0.0)
    z = curve.z_grid[mask]
    s_val = ser.eval_series(curve.series, z)
    return float(np.max(np.abs(curve.u_values[mask] / s_val - 1.0)))


def fit_tail(curve: ProfileCurve, window: tuple[float, float] = (1e-6, 1e-3), rel_tol: float = 0.01) -> float:
    """Fit ``1 - u ~ c_hat z**(-alpha_hat)`` on ``1 - u`` in `window`; returns c_hat."""
    gap = curve.gap_values
    lo, hi = window
    if gap[-1] > lo:
        raise FitError(f"trajectory stops at 1 - u = {gap[-1]:.3g}, above the fit window")
    mask = (gap >= lo) & (gap <= hi)
    slope, intercept = np.polyfit(curve.tau_grid[mask], np.log(gap[mask]), 1)
    ah = curve.params.alpha_hat
    if abs(slope + ah) / ah > rel_tol:
        raise FitError(f"tail slope {slope:.6g} differs from -alpha_hat={-ah:.6g} by more than {rel_tol:.0%}")
    return float(math.exp(intercept))


def tail_slope(curve: ProfileCurve, window: tuple[float, float] = (1e-6, 1e-3)) -> float:
    gap = curve.gap_values
    mask = (gap >= window[0]) & (gap <= window[1])
    return float(np.polyfit(curve.tau_grid[mask], np.log(gap[mask]), 1)[0])


def residual_values(beta: float, dtau: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Pointwise ``beta z u' + u^2 + u - 2 v`` at interior samples.

    ``z u'`` is the fourth-order central difference in tau, so the result
    measures how well the samples satisfy the equation, not the vector field.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du = (u[:-4] - 8.0 * u[1:-3] + 8.0 * u[3:-1] - u[4:]) / (12.0 * dtau)
    uc, vc = u[2:-2], v[2:-2]
    return beta * du + uc * uc + uc - 2.0 * vc


def residual(curve: ProfileCurve) -> float:
    """Max residual of the profile equation over interior grid points."""
    dtau = float(curve.tau_grid[1] - curve.tau_grid[0])
    return float(np.max(np.abs(residual_values(curve.beta, dtau, curve.u_values, curve.v_values))))


def build_profile(alpha: float, config: ShootConfig = ShootConfig(), n_terms: int = 400) -> ProfileCurve:
    """Shoot, normalize against the series and fit the tail amplitude."""
    data = ser.coefficients(alpha, n_terms)
    curve = normalize(shoot(alpha, config), data)
    c_hat = fit_tail(curve)
    return replace(curve, params=curve.params.with_c_hat(c_hat), c_hat_fit=c_hat)
