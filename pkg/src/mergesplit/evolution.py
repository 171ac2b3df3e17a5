"""IMEX solver for the Bernstein-space evolution equation

    dU/dt = -U**2 - U + 2 (A U),   (A U)(s) = int_0^1 U(s r) dr

on a geometric grid ``s_k = s_min * ratio**k``. One step is

    U_hat = U + 2 dt (A U)
    (1 + dt) U_new + dt U_new**2 = U_hat

solved pointwise for the positive root. Both stages are order-preserving, so
the scheme inherits the comparison principle.

The average is computed with one cumulative pass. Each cell is integrated
exactly for the power law through its endpoint values (``quadrature="powerlaw"``),
which makes ``A s**p = s**p / (1 + p)`` exact; ``quadrature="trapezoid"``
uses the trapezoid rule in ``log s`` instead. Below ``s_min`` the function is
continued as a power law, either with a declared exponent ``left_exponent``
or, when that is ``None``, with the local power of the first cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, ResolutionError
from .params import beta_of_alpha

__all__ = [
    "GridSpec",
    "GridFunction",
    "EvolutionState",
    "geometric_grid",
    "average",
    "averaging",
    "hardy_ratio",
    "hardy_norm_probe",
    "step_imex",
    "evolve",
    "evolve_extrapolated",
    "rescaled_error",
    "comparison_test",
    "decomposition_check",
    "logistic_m0",
]


@dataclass(frozen=True)
class GridSpec:
    s_min: float = 1e-12
    s_max: float = 1e8
    per_decade: int = 40

    def build(self) -> np.ndarray:
        return geometric_grid(self.s_min, self.s_max, self.per_decade)


def geometric_grid(s_min: float, s_max: float, per_decade: int) -> np.ndarray:
    if not 0.0 < s_min < s_max or per_decade < 1:
        raise DomainError("need 0 < s_min < s_max and per_decade >= 1")
    n = int(round(per_decade * math.log10(s_max / s_min)))
    return s_min * 10.0 ** (np.arange(n + 1) / per_decade)


@dataclass(frozen=True)
class GridFunction:
    """Samples of a function on a geometric grid.

    ``left_exponent`` is the power assumed below ``s_grid[0]``; it closes the
    average near the origin. ``None`` uses the power through the first two
    samples, which tracks a slowly drifting local exponent. ``weight_exponent`` selects the averaging measure
    ``d(r**m)``: 1 gives the plain average, ``1/alpha`` the subordinated one.
    """

    s_grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    left_exponent: Optional[float] = None
    weight_exponent: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.s_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if s.ndim != 1 or s.shape != vals.shape or s.size < 2:
            raise DomainError("grid and values must be 1-d arrays of equal length >= 2")
        ratios = s[1:] / s[:-1]
        if np.any(ratios <= 1.0) or np.ptp(np.log(ratios)) > 1e-9 * abs(math.log(ratios[0])) + 1e-12:
            raise DomainError("s_grid must be geometric and increasing")
        object.__setattr__(self, "s_grid", s)
        object.__setattr__(self, "values", vals)

    @property
    def log_ratio(self) -> float:
        return float(math.log(self.s_grid[1] / self.s_grid[0]))

    @classmethod
    def from_callable(cls, func: Callable, s_grid: np.ndarray, left_exponent: Optional[float] = None, **kw) -> "GridFunction":
        s_grid = np.asarray(s_grid, dtype=float)
        return cls(s_grid, np.asarray(func(s_grid), dtype=float), left_exponent, **kw)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return replace(self, values=np.asarray(values, dtype=float))

    def interpolate(self, s) -> np.ndarray:
        """Cubic spline in ``log s``; raises outside the grid."""
        s = np.asarray(s, dtype=float)
        lo, hi = self.s_grid[0], self.s_grid[-1]
        if np.any(s < lo * (1 - 1e-12)) or np.any(s > hi * (1 + 1e-12)):
            raise ResolutionError("interpolation point outside the grid")
        spline = self.__dict__.get("_spline")
        if spline is None:
            spline = CubicSpline(np.log(self.s_grid), self.values)
            object.__setattr__(self, "_spline", spline)
        return spline(np.log(np.clip(s, lo, hi)))


def _cell_integrals(values: np.ndarray, s: np.ndarray, h: float, m: float, quadrature: str) -> np.ndarray:
    """``int_{s_i}^{s_{i+1}} U d(r**m)`` for every cell."""
    a, b = values[:-1], values[1:]
    sm = s[:-1] ** m
    if quadrature == "trapezoid":
        # trapezoid in log s of U(e^x) m e^{m x}
        return 0.5 * h * m * (a * sm + b * sm * math.exp(m * h))
    if quadrature != "powerlaw":
        raise DomainError(f"unknown quadrature {quadrature!r}")
    out = np.empty_like(a)
    pos = (a > 0.0) & (b > 0.0)
    ap, bp = a[pos], b[pos]
    # differences of logs stay finite for subnormal samples, where b/a overflows
    x = np.log(bp) - np.log(ap) + m * h
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, x)
    # a (e^x - 1)/x rewritten as (b e^{mh} - a)/x since a e^x = b e^{mh}
    cell = np.where(small, ap * (1.0 + 0.5 * x), (bp * math.exp(m * h) - ap) / xs)
    out[pos] = sm[pos] * m * h * cell
    # cells touching zero or changing sign: trapezoid in log s
    neg = ~pos
    out[neg] = 0.5 * h * m * (a[neg] * sm[neg] + b[neg] * sm[neg] * math.exp(m * h))
    return out


def _left_power(grid: GridFunction) -> float:
    # local power of the first cell, or the declared exponent if unusable;
    # powers at or below -m/2 would make the closure's L2 head infinite
    p = grid.left_exponent
    if p is not None:
        return p
    u0, u1 = grid.values[0], grid.values[1]
    if u0 > 0.0 and u1 > 0.0:
        p = math.log(u1 / u0) / grid.log_ratio
        if p > -0.5 * grid.weight_exponent:
            return p
    return 0.0


def average(grid: GridFunction, quadrature: str = "powerlaw") -> np.ndarray:
    """``(A_m U)(s_k) = s_k**(-m) int_0^{s_k} U d(r**m)`` at every node, O(K)."""
    s, u = grid.s_grid, grid.values
    m = grid.weight_exponent
    h = grid.log_ratio
    left = u[0] * s[0] ** m * m / (_left_power(grid) + m)
    cum = np.empty_like(u)
    cum[0] = left
    np.cumsum(_cell_integrals(u, s, h, m, quadrature), out=cum[1:])
    cum[1:] += left
    return cum / s**m


def averaging(grid: GridFunction, s, quadrature: str = "powerlaw"):
    """Average ``(1/s) int_0^s U(r) dr`` at arbitrary ``s`` inside the grid."""
    s_arr = np.asarray(s, dtype=float)
    lo, hi = grid.s_grid[0], grid.s_grid[-1]
    if np.any(s_arr < lo * (1 - 1e-12)) or np.any(s_arr > hi * (1 + 1e-12)):
        raise DomainError("averaging point outside the grid")
    m = grid.weight_exponent
    nodes = average(grid, quadrature) * grid.s_grid**m
    h = grid.log_ratio
    k = np.clip(np.floor(np.log(s_arr / lo) / h + 1e-12).astype(int), 0, grid.s_grid.size - 2)
    frac = np.log(s_arr / grid.s_grid[k])
    a, b = grid.values[k], grid.values[k + 1]
    base = grid.s_grid[k] ** m
    # partial cell under the same interpolant as the full cells
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where((a > 0) & (b > 0), np.log(b / a) / h, 0.0)
    if quadrature == "powerlaw":
        x = (p + m) * frac
        part = np.where(
            (a > 0) & (b > 0),
            a * base * m * frac * np.where(np.abs(x) < 1e-8, 1.0 + 0.5 * x, np.expm1(x) / np.where(x == 0, 1, x)),
            0.0,
        )
        lin = ~((a > 0) & (b > 0))
    else:
        lin = np.ones_like(a, dtype=bool)
        part = np.zeros_like(a)
    if np.any(lin):
        t = frac / h
        ue = a + (b - a) * t
        lin_part = 0.5 * frac * m * (a * base + ue * base * np.exp(m * frac))
        part = np.where(lin, lin_part, part)
    out = (nodes[k] + part) / s_arr**m
    return out if out.ndim else float(out)


def _l2(values: np.ndarray, s: np.ndarray, h: float) -> float:
    # int |f|^2 ds as trapezoid in log s
    w = values * values * s
    return math.sqrt(h * (w.sum() - 0.5 * (w[0] + w[-1])))


def hardy_ratio(grid: GridFunction, quadrature: str = "powerlaw") -> float:
    """``||A U||_2 / ||U||_2`` in ``L^2(ds)`` for the grid function.

    The power-law continuation below ``s_grid[0]`` that closes the average
    is part of the function, so its exact contribution enters both norms.
    """
    avg = average(grid, quadrature)
    h = grid.log_ratio
    s0 = grid.s_grid[0]
    m = grid.weight_exponent
    p = _left_power(grid)
    if 2.0 * p + 1.0 > 0.0:
        # int_0^{s0} (u0 (s/s0)**p)**2 ds, and the same for A U = m/(p+m) U there
        head_u = grid.values[0] ** 2 * s0 / (2.0 * p + 1.0)
        head_a = head_u * (m / (p + m)) ** 2
    else:
        head_u = head_a = math.inf
    num = math.sqrt(_l2(avg, grid.s_grid, h) ** 2 + head_a)
    den = math.sqrt(_l2(grid.values, grid.s_grid, h) ** 2 + head_u)
    return num / den


def hardy_norm_probe(samples: Iterable[GridFunction], quadrature: str = "powerlaw") -> float:
    """Largest Hardy ratio over a nonempty collection of grid functions."""
    ratios = [hardy_ratio(g, quadrature) for g in samples]
    if not ratios:
        raise DomainError("need at least one sample")
    return max(ratios)


@dataclass(frozen=True)
class EvolutionState:
    grid: GridFunction
    time: float
    m0: float

    @property
    def values(self) -> np.ndarray:
        return self.grid.values


def _implicit_root(u_hat, dt: float):
    # positive root of dt x^2 + (1 + dt) x - u_hat = 0, rationalized
    b = 1.0 + dt
    disc = b * b + 4.0 * dt * u_hat
    if np.any(disc < 0.0):
        raise AssertionError("negative discriminant: U_hat < 0 upstream")
    return 2.0 * u_hat / (b + np.sqrt(disc))


def step_imex(state: EvolutionState, dt: float, quadrature: str = "powerlaw", dt_max: float = 1e-2) -> EvolutionState:
    """Advance one IMEX step of size `dt`; ``m0`` follows the same scalar scheme."""
    if not 0.0 < dt <= dt_max:
        raise DomainError(f"dt must lie in (0, {dt_max}], got {dt!r}")
    u = state.grid.values
    u_hat = u + 2.0 * dt * average(state.grid, quadrature)
    u_new = _implicit_root(u_hat, dt)
    if math.isinf(state.m0):
        m0_new = math.inf
    else:
        m0_new = float(_implicit_root((1.0 + 2.0 * dt) * state.m0, dt))
    return EvolutionState(state.grid.with_values(u_new), state.time + dt, m0_new)


def logistic_m0(m0_initial: float, t):
    """Closed-form solution of ``m' = m - m**2``."""
    t = np.asarray(t, dtype=float)
    if math.isinf(m0_initial):
        return 1.0 / -np.expm1(-t)
    return 1.0 / (1.0 + (1.0 / m0_initial - 1.0) * np.exp(-t))


def evolve(
    u0: GridFunction,
    t_end: float,
    dt: float = 1e-2,
    *,
    m0: Optional[float] = None,
    snapshot_times: Optional[Sequence[float]] = None,
    quadrature: str = "powerlaw",
    richardson: bool = False,
) -> list[EvolutionState]:
    """Run the IMEX scheme to `t_end`; returns the snapshots (t = 0 and t_end included).

    `m0` defaults to the value at the last grid point when the data look
    saturated there, and to infinity otherwise. With ``richardson=True`` the
    run is repeated at ``dt/2`` and the snapshots are combined as
    ``2 U_{dt/2} - U_dt``, cancelling the first-order splitting error. The
    combination is no longer order-preserving.
    """
    if t_end < 0.0:
        raise DomainError("t_end must be nonnegative")
    n_steps = int(round(t_end / dt))
    if n_steps and abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise DomainError("t_end must be a multiple of dt")
    if m0 is None:
        vals = u0.values
        saturated = abs(vals[-1] - vals[-2]) <= 1e-8 * max(abs(vals[-1]), 1e-300)
        m0 = float(vals[-1]) if saturated else math.inf
    wanted = set()
    if snapshot_times is not None:
        for ts in snapshot_times:
            k = int(round(ts / dt))
            if abs(k * dt - ts) > 1e-9 * max(1.0, ts) or k > n_steps:
                raise DomainError(f"snapshot time {ts} is not a step of the run")
            wanted.add(k)
    wanted.update({0, n_steps})
    coarse = _run(u0, m0, dt, n_steps, sorted(wanted), quadrature)
    if not richardson:
        return coarse
    fine = _run(u0, m0, 0.5 * dt, 2 * n_steps, [2 * k for k in sorted(wanted)], quadrature)
    out = []
    for c, f in zip(coarse, fine):
        vals = 2.0 * f.values - c.values
        m = f.m0 if math.isinf(f.m0) else 2.0 * f.m0 - c.m0
        out.append(EvolutionState(c.grid.with_values(vals), c.time, m))
    return out


def _run(u0, m0, dt, n_steps, wanted, quadrature):
    wanted = set(wanted)
    state = EvolutionState(u0, 0.0, m0)
    out = [state] if 0 in wanted else []
    for k in range(1, n_steps + 1):
        state = step_imex(state, dt, quadrature, dt_max=max(dt, 1e-2))
        # exact time stamps avoid drift from repeated addition
        state = replace(state, time=k * dt)
        if k in wanted:
            out.append(state)
    return out


def evolve_extrapolated(
    func: Callable,
    spec: GridSpec,
    t_end: float,
    dt: float = 1e-2,
    *,
    m0: Optional[float] = None,
    snapshot_times: Optional[Sequence[float]] = None,
    quadrature: str = "powerlaw",
) -> list[EvolutionState]:
    """Space-time extrapolated evolution of the data ``func`` sampled on `spec`.

    Two time-extrapolated runs, on `spec` with step `dt` and on the grid with
    twice the density with step ``dt/2``, carry leading errors in the ratio
    4 : 1 because both the quadrature and the time error are quadratic. The
    combination ``(4 fine - coarse) / 3`` on the coarse nodes removes both.
    """
    fine_spec = replace(spec, per_decade=2 * spec.per_decade)
    coarse_grid = GridFunction.from_callable(func, spec.build())
    fine_grid = GridFunction.from_callable(func, fine_spec.build())
    if fine_grid.s_grid.size != 2 * coarse_grid.s_grid.size - 1:
        raise DomainError("grid spec does not nest under refinement")
    kw = dict(m0=m0, snapshot_times=snapshot_times, quadrature=quadrature, richardson=True)
    coarse = evolve(coarse_grid, t_end, dt, **kw)
    fine = evolve(fine_grid, t_end, 0.5 * dt, **kw)
    out = []
    for c, f in zip(coarse, fine):
        vals = (4.0 * f.values[::2] - c.values) / 3.0
        m = f.m0 if math.isinf(f.m0) else (4.0 * f.m0 - c.m0) / 3.0
        out.append(EvolutionState(c.grid.with_values(vals), c.time, m))
    return out


def rescaled_error(
    state: EvolutionState,
    profile: Callable,
    window: tuple[float, float] = (0.1, 10.0),
    beta: Optional[float] = None,
    alpha: Optional[float] = None,
    n_points: int = 401,
) -> float:
    """``sup_{s in window} |U(s e^{-beta t}, t) - u(s)|``.

    `profile` is any callable ``u(s)``; a :class:`~mergesplit.profile.ProfileCurve`
    supplies ``beta`` itself.
    """
    if beta is None:
        beta = profile.beta if hasattr(profile, "beta") else beta_of_alpha(alpha)
    s = np.geomspace(window[0], window[1], n_points)
    shrink = math.exp(-beta * state.time)
    grid = state.grid
    if s[0] * shrink < grid.s_grid[0] or s[-1] * shrink > grid.s_grid[-1]:
        raise ResolutionError("rescaled window falls outside the evolution grid")
    return float(np.max(np.abs(grid.interpolate(s * shrink) - profile(s))))


@dataclass(frozen=True)
class ComparisonReport:
    min_difference: float
    time_of_min: float
    index_of_min: int
    tol: float = 1e-12

    @property
    def ok(self) -> bool:
        return self.min_difference >= -self.tol


def comparison_test(
    u0: GridFunction,
    v0: GridFunction,
    t_end: float,
    dt: float = 1e-2,
    quadrature: str = "powerlaw",
) -> ComparisonReport:
    """Evolve an ordered pair and report the smallest ``U - V`` over grid and time."""
    if np.any(u0.values < v0.values):
        raise DomainError("initial data must satisfy U0 >= V0 pointwise")
    su = EvolutionState(u0, 0.0, math.inf)
    sv = EvolutionState(v0, 0.0, math.inf)
    diff = u0.values - v0.values
    worst, worst_t, worst_k = float(diff.min()), 0.0, int(diff.argmin())
    for k in range(1, int(round(t_end / dt)) + 1):
        su = step_imex(su, dt, quadrature, dt_max=max(dt, 1e-2))
        sv = step_imex(sv, dt, quadrature, dt_max=max(dt, 1e-2))
        diff = su.values - sv.values
        j = int(diff.argmin())
        if diff[j] < worst:
            worst, worst_t, worst_k = float(diff[j]), k * dt, j
    return ComparisonReport(worst, worst_t, worst_k)


@dataclass(frozen=True)
class DecompositionReport:
    alpha: float
    t_end: float
    sup_difference: float
    tol: float = 1e-6

    @property
    def ok(self) -> bool:
        return self.sup_difference <= self.tol


def decomposition_check(
    alpha: float,
    v0: GridFunction,
    t_end: float,
    dt: float = 1e-2,
    quadrature: str = "powerlaw",
    tol: float = 1e-6,
) -> DecompositionReport:
    """Evolve ``U0(s) = V0(s**alpha)`` under ``A`` and ``V0`` under ``A_alpha``.

    The U grid is the preimage ``s = w**(1/alpha)`` of the V grid, so the two
    runs are compared node by node.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    v_grid = GridFunction(v0.s_grid, v0.values, v0.left_exponent, weight_exponent=1.0 / alpha)
    left = None if v0.left_exponent is None else alpha * v0.left_exponent
    u_grid = GridFunction(v0.s_grid ** (1.0 / alpha), v0.values, left)
    su = EvolutionState(u_grid, 0.0, math.inf)
    sv = EvolutionState(v_grid, 0.0, math.inf)
    worst = 0.0
    for _ in range(int(round(t_end / dt))):
        su = step_imex(su, dt, quadrature, dt_max=max(dt, 1e-2))
        sv = step_imex(sv, dt, quadrature, dt_max=max(dt, 1e-2))
        worst = max(worst, float(np.max(np.abs(su.values - sv.values))))
    return DecompositionReport(alpha, t_end, worst, tol)
