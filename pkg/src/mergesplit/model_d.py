"""Truncated discrete merging-splitting system.

Clusters of sizes ``1..N`` merge pairwise at constant rate 2 and a cluster
of size ``k`` splits into ``(j, k - j)`` at rate ``2 / (k + 1)``:

    df_i/dt = sum_{j<i} f_j f_{i-j} - 2 f_i m0
              + sum_{k>i} 2 f_k / (k + 1) - (i - 1) f_i / (i + 1)

Merges that would create a cluster larger than ``N`` are dropped; the mass
they carry is accumulated as ``mass_leak``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import DOP853
from scipy.special import gamma

from .errors import DomainError, IntegrationError, InstabilityError, ResolutionError
from .evolution import GridFunction

__all__ = [
    "ModelDState",
    "init_powerlaw",
    "rhs",
    "rhs_bruteforce",
    "leak_rate",
    "integrate",
    "bernstein_of_state",
    "transform_residual",
    "profile_error",
    "FFT_THRESHOLD",
]

FFT_THRESHOLD = 4096


@dataclass(frozen=True)
class ModelDState:
    """Number densities ``f[i-1] = f_i`` for ``i = 1..N`` at one time."""

    f: np.ndarray = field(repr=False)
    time: float = 0.0
    mass_leak: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.ndim != 1 or f.size < 1:
            raise DomainError("f must be a nonempty 1-d array")
        object.__setattr__(self, "f", f)

    @property
    def n_max(self) -> int:
        return self.f.size

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(1, self.f.size + 1, dtype=float)

    @property
    def m0(self) -> float:
        return float(math.fsum(self.f))

    @property
    def m1(self) -> float:
        return float(math.fsum(self.sizes * self.f))


def init_powerlaw(alpha: float, lam: float = 1.0, n_max: int = 10**5) -> ModelDState:
    """``f_k = alpha lam**-alpha / Gamma(1 - alpha) * k**(-1 - alpha)``.

    Partial first moments then grow like ``alpha lam**-alpha x**(1-alpha) / Gamma(2-alpha)``.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if not lam > 0.0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    if n_max < 1:
        raise DomainError("n_max must be positive")
    k = np.arange(1, n_max + 1, dtype=float)
    c = alpha * lam**-alpha / gamma(1.0 - alpha)
    return ModelDState(c * k ** (-1.0 - alpha))


def _full_convolution(f: np.ndarray) -> np.ndarray:
    # conv[k] = sum_{i+j=k} f_i f_j for k = 2..2N, returned with index k-2
    n = f.size
    if n <= FFT_THRESHOLD:
        return np.convolve(f, f)
    size = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(f, size)
    return np.fft.irfft(spec * spec, size)[: 2 * n - 1]


def _rhs_and_leak(f: np.ndarray) -> tuple[np.ndarray, float]:
    n = f.size
    i = np.arange(1, n + 1, dtype=float)
    conv = _full_convolution(f)
    gain = np.zeros(n)
    gain[1:] = conv[: n - 1]
    m0 = math.fsum(f)
    split = 2.0 * f / (i + 1.0)
    # suffix sums over k > i
    tail = np.concatenate((np.cumsum(split[::-1])[::-1][1:], [0.0]))
    out = gain - 2.0 * m0 * f + tail - (i - 1.0) / (i + 1.0) * f
    k_over = np.arange(n + 1, 2 * n + 1, dtype=float)
    leak = float(np.dot(k_over, conv[n - 1 :]))
    return out, leak


def rhs(state: ModelDState) -> np.ndarray:
    """Time derivative of ``f`` with merges beyond ``N`` dropped."""
    return _rhs_and_leak(state.f)[0]


def leak_rate(state: ModelDState) -> float:
    """Mass flux into sizes above ``N``: ``sum_{i+j>N} (i + j) f_i f_j``."""
    return _rhs_and_leak(state.f)[1]


def rhs_bruteforce(f: np.ndarray) -> np.ndarray:
    """Loop-by-loop evaluation of the gain/loss sums; reference for small N."""
    f = np.asarray(f, dtype=float)
    n = f.size
    out = np.zeros(n)
    for i in range(1, n + 1):
        acc = 0.0
        for j in range(1, i):
            acc += 0.5 * 2.0 * f[j - 1] * f[i - j - 1]
        for j in range(1, n + 1):
            acc -= 2.0 * f[i - 1] * f[j - 1]
        for j in range(1, n - i + 1):
            acc += 2.0 / (i + j + 1) * f[i + j - 1]
        for j in range(1, i):
            acc -= 0.5 * 2.0 / (i + 1) * f[i - 1]
        out[i - 1] = acc
    return out


def integrate(
    state: ModelDState,
    t_end: float,
    snapshot_times: Optional[Sequence[float]] = None,
    rtol: float = 1e-8,
    atol: float = 1e-20,
    min_step: float = 1e-12,
    rhs_func: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> list[ModelDState]:
    """Adaptive DOP853 integration; returns states at the snapshot times.

    The leaked mass is integrated as an extra component. `rhs_func` swaps in
    another right-hand side (the brute-force one, say) and then no leak is
    tracked. Raises :class:`IntegrationError` when the step collapses below
    `min_step` and :class:`InstabilityError` on a negative density.
    """
    if t_end < state.time:
        raise DomainError("t_end precedes the state time")
    times = sorted({float(t) for t in (snapshot_times or [])} | {state.time, float(t_end)})
    if times[0] < state.time:
        raise DomainError("snapshot before the initial time")
    n = state.n_max

    def fun(t, y):
        if rhs_func is not None:
            return np.append(rhs_func(y[:n]), 0.0)
        d, leak = _rhs_and_leak(y[:n])
        return np.append(d, leak)

    y0 = np.append(state.f, state.mass_leak)
    out = [state]
    pending = [t for t in times if t > state.time]
    if not pending:
        return out
    # the default first-step heuristic collapses when atol is tiny
    first = min(1e-3, float(t_end) - state.time)
    solver = DOP853(fun, state.time, y0, t_bound=float(t_end), rtol=rtol, atol=atol, first_step=first)
    while pending:
        if solver.status != "running":
            raise IntegrationError(f"integrator stopped at t={solver.t}: {solver.status}")
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integrator failed at t={solver.t}: {msg}")
        if solver.step_size is not None and solver.step_size < min_step and solver.status == "running":
            raise IntegrationError(f"step size collapsed to {solver.step_size:.3e} at t={solver.t}")
        dense = None
        while pending and pending[0] <= solver.t:
            ts = pending.pop(0)
            if ts == solver.t:
                y = solver.y.copy()
            else:
                dense = dense or solver.dense_output()
                y = dense(ts)
            f = y[:n]
            floor = -1e-14 * float(np.max(np.abs(f), initial=0.0))
            if np.any(f < floor):
                raise InstabilityError(f"negative density at t={ts}: min {f.min():.3e}")
            out.append(ModelDState(f, ts, float(y[n])))
    return out


def bernstein_of_state(state: ModelDState, s_hat) -> np.ndarray:
    """``sum_j (1 - exp(-j s)) f_j`` at each ``s`` (nondecreasing, tends to m0)."""
    s = np.atleast_1d(np.asarray(s_hat, dtype=float))
    if np.any(s < 0.0):
        raise DomainError("s_hat must be nonnegative")
    j = state.sizes
    out = np.empty_like(s)
    # chunks keep the outer product below ~ 2**22 entries
    step = max(1, (1 << 22) // j.size)
    for a in range(0, s.size, step):
        blk = s[a : a + step]
        out[a : a + step] = -np.expm1(-np.outer(blk, j)) @ state.f
    return out if np.ndim(s_hat) else out[0]


def bernstein_grid(state: ModelDState, s_hat_grid) -> GridFunction:
    """Bernstein transform on a geometric grid, as a :class:`GridFunction`."""
    s = np.asarray(s_hat_grid, dtype=float)
    return GridFunction(s, bernstein_of_state(state, s))


def transform_residual(state: ModelDState, s_hat, include_truncation: bool = True) -> np.ndarray:
    """Residual of the transformed equation for the state's own time derivative.

    The transform of ``rhs`` is compared with ``-B**2 - B + 2/(1-e^-s) int_0^s B e^-r dr``
    where the integral is summed in closed form per size. Merges dropped by
    the truncation enter as ``-sum_{k>N} (1 - e^{-k s}) conv_k`` unless
    `include_truncation` is false.
    """
    s = np.atleast_1d(np.asarray(s_hat, dtype=float))
    if np.any(s <= 0.0):
        raise DomainError("s_hat must be positive")
    f = state.f
    n = f.size
    j = state.sizes
    d, _ = _rhs_and_leak(f)
    phi = -np.expm1(-np.outer(s, j))
    lhs = phi @ d
    b = phi @ f
    one_minus = -np.expm1(-s)
    # int_0^s (1 - e^{-j r}) e^{-r} dr = (1 - e^{-s}) - (1 - e^{-(j+1)s}) / (j + 1)
    integ = one_minus * f.sum() - (-np.expm1(-np.outer(s, j + 1.0)) / (j + 1.0)) @ f
    right = -b * b - b + 2.0 * integ / one_minus
    if include_truncation:
        conv = _full_convolution(f)
        k = np.arange(n + 1, 2 * n + 1, dtype=float)
        right = right - (-np.expm1(-np.outer(s, k))) @ conv[n - 1 :]
    res = lhs - right
    return res if np.ndim(s_hat) else res[0]


def profile_error(
    state: ModelDState,
    profile: Callable,
    lam: float = 1.0,
    beta: Optional[float] = None,
    window: tuple[float, float] = (0.1, 10.0),
    n_points: int = 201,
) -> float:
    """``sup_{s in window} |B(s e^{-beta t}, t) - u(s / lam)|`` for the transform ``B``.

    Raises :class:`ResolutionError` once ``window[0] e^{-beta t}`` drops below
    ``1/N``, where sizes beyond the truncation would matter.
    """
    if beta is None:
        beta = profile.beta
    shrink = math.exp(-beta * state.time)
    if window[0] * shrink < 1.0 / state.n_max:
        raise ResolutionError(
            f"s = {window[0] * shrink:.3e} is below the truncation scale 1/N = {1.0 / state.n_max:.3e}"
        )
    s = np.geomspace(window[0], window[1], n_points)
    return float(np.max(np.abs(bernstein_of_state(state, s * shrink) - profile(s / lam))))
