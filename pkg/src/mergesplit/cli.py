"""Command-line driver: ``mergesplit {profile,evolve,modeld,invert,check}``.

Parameters come from defaults, then a flat ``key = value`` file (``--config``),
then flags, later sources winning. Exit codes: 0 pass, 1 computation
failure, 2 validation error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import traceback
import warnings
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import acceptance
from . import evolution as ev
from . import model_d as md
from . import profile as pr
from . import transforms as tr
from .errors import MergeSplitError
from .io import read_flat_config, write_csv, write_json

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

DEFAULTS: dict[str, dict[str, Any]] = {
    "profile": {"alpha": 0.5, "lambda": 1.0, "out": "out", "check": False, "seed": 0},
    "evolve": {
        "alpha": 0.5,
        "lambda": 1.0,
        "dt": 1e-2,
        "t_end": 20.0,
        "grid_min": 1e-20,
        "grid_max": 1e8,
        "per_decade": 40,
        "out": "out",
        "check": False,
        "seed": 0,
    },
    "modeld": {
        "alpha": 0.5,
        "lambda": 1.0,
        "n": 100000,
        "t_end": 12.0,
        "snapshot_every": 0.0,
        "threshold": 1e-12,
        "out": "out",
        "check": False,
        "seed": 0,
    },
    "invert": {
        "alpha": 0.5,
        "grid_min": 1e-6,
        "grid_max": 1e6,
        "per_decade": 20,
        "out": "out",
        "check": False,
        "seed": 0,
    },
    "check": {"out": "out", "quick": False, "seed": 0},
}

_TYPES = {
    "alpha": float,
    "lambda": float,
    "dt": float,
    "t_end": float,
    "grid_min": float,
    "grid_max": float,
    "per_decade": int,
    "n": int,
    "seed": int,
    "snapshot_every": float,
    "threshold": float,
    "out": str,
    "check": bool,
    "quick": bool,
}


class ValidationError(Exception):
    pass


def _coerce(key: str, value: Any) -> Any:
    kind = _TYPES.get(key)
    if kind is None:
        raise ValidationError(f"unknown parameter {key!r}")
    if kind is bool and isinstance(value, str):
        low = value.strip().lower()
        if low not in {"true", "false", "1", "0", "yes", "no"}:
            raise ValidationError(f"{key}: expected a boolean, got {value!r}")
        return low in {"true", "1", "yes"}
    try:
        if kind is int and isinstance(value, str):
            as_float = float(value)
            if not as_float.is_integer():
                raise ValueError
            return int(as_float)
        return kind(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{key}: cannot read {value!r} as {kind.__name__}") from None


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def validate(command: str, cfg: dict) -> None:
    """Check every numeric parameter before any computation starts."""
    if "alpha" in cfg:
        _require(0.0 < cfg["alpha"] < 1.0, f"alpha must lie in (0, 1), got {cfg['alpha']}")
    if "lambda" in cfg:
        _require(cfg["lambda"] > 0.0 and math.isfinite(cfg["lambda"]), "lambda must be positive")
    if "dt" in cfg:
        _require(0.0 < cfg["dt"] <= 1e-2, "dt must lie in (0, 0.01]")
    if "t_end" in cfg:
        _require(0.0 <= cfg["t_end"] < 1e4, "t_end must lie in [0, 1e4)")
    if command == "evolve":
        steps = cfg["t_end"] / cfg["dt"]
        _require(abs(steps - round(steps)) < 1e-9 * max(1.0, steps), "t_end must be a multiple of dt")
    if "grid_min" in cfg:
        _require(0.0 < cfg["grid_min"] < cfg["grid_max"], "need 0 < grid_min < grid_max")
        _require(cfg["per_decade"] >= 2, "per_decade must be at least 2")
    if "n" in cfg:
        _require(20 <= cfg["n"] <= 10**7, "n must lie in [20, 1e7]")
    if "snapshot_every" in cfg:
        _require(cfg["snapshot_every"] >= 0.0, "snapshot_every must be nonnegative")


def _profile_callable(curve: pr.ProfileCurve, lam: float):
    return lambda s: curve(np.asarray(s, dtype=float) / lam)


def _step_marks(t_end: float, dt: float) -> list[int]:
    # step indices of the whole time units up to t_end, plus t_end itself
    n_end = int(round(t_end / dt))
    per_unit = int(round(1.0 / dt))
    marks = list(range(0, n_end + 1, per_unit))
    return marks if marks[-1] == n_end else marks + [n_end]


def cmd_profile(cfg: dict, out: Path) -> int:
    alpha = cfg["alpha"]
    curve = pr.build_profile(alpha)
    params = curve.params
    res = pr.residual(curve)
    mis = pr.series_mismatch(curve)
    slope = pr.tail_slope(curve)
    checks = {
        "ode_residual_below_1e-8": res < 1e-8,
        "series_overlap_below_1e-6": mis < 1e-6,
        "tail_slope_within_1pct": abs(slope + params.alpha_hat) / params.alpha_hat < 0.01,
    }
    stride = max(1, curve.tau_grid.size // 2000)
    rows = zip(curve.z_grid[::stride], curve.u_values[::stride], curve.gap_values[::stride], curve.v_values[::stride])
    write_csv(out / f"profile_alpha{alpha:g}.csv", ["z", "u", "one_minus_u", "v"], rows)
    summary = {
        "params": params.as_dict(),
        "radius_estimate": curve.series.radius_est,
        "ode_residual": res,
        "series_overlap_error": mis,
        "tail_slope": slope,
        "checks": checks,
    }
    write_json(out / f"profile_alpha{alpha:g}.json", "profile", cfg, summary)
    print(f"beta={params.beta:.6f} alpha_hat={params.alpha_hat:.6f} c_hat={params.c_hat:.6f} residual={res:.2e}")
    if cfg["check"] and not all(checks.values()):
        return EXIT_FAIL
    return EXIT_OK


def cmd_evolve(cfg: dict, out: Path) -> int:
    alpha, lam = cfg["alpha"], cfg["lambda"]
    curve = pr.build_profile(alpha)
    spec = ev.GridSpec(cfg["grid_min"], cfg["grid_max"], cfg["per_decade"])
    times = [t * cfg["dt"] for t in _step_marks(cfg["t_end"], cfg["dt"])]
    snaps = ev.evolve_extrapolated(lambda s: (s / lam) ** alpha, spec, cfg["t_end"], cfg["dt"], snapshot_times=times)
    target = _profile_callable(curve, lam)
    errors = []
    for s in snaps:
        try:
            errors.append(ev.rescaled_error(s, target, beta=curve.beta))
        except MergeSplitError:
            errors.append(None)
    final = snaps[-1]
    write_csv(out / "evolve_final.csv", ["s", "U"], zip(final.grid.s_grid, final.values))
    valid = [e for e in errors if e is not None]
    checks = {
        "error_decreasing": all(b < a for a, b in zip(valid, valid[1:])),
        "final_error_below_1e-3": bool(valid) and valid[-1] < 1e-3,
    }
    write_json(
        out / "evolve.json",
        "evolve",
        cfg,
        {"times": [s.time for s in snaps], "rescaled_error": errors, "m0": [s.m0 for s in snaps], "checks": checks},
    )
    for s, e in zip(snaps, errors):
        print(f"t={s.time:6.2f} rescaled_error={e if e is None else format(e, '.3e')}")
    if cfg["check"] and not all(checks.values()):
        return EXIT_FAIL
    return EXIT_OK


def cmd_modeld(cfg: dict, out: Path) -> int:
    alpha, lam, n = cfg["alpha"], cfg["lambda"], cfg["n"]
    curve = pr.build_profile(alpha)
    times = [float(t) for t in range(int(cfg["t_end"]) + 1)]
    if times[-1] != cfg["t_end"]:
        times.append(cfg["t_end"])
    state0 = md.init_powerlaw(alpha, lam, n)
    traj = md.integrate(state0, cfg["t_end"], times)
    errs = []
    for s in traj:
        try:
            errs.append(md.profile_error(s, curve, lam))
        except MergeSplitError:
            errs.append(None)
    every = cfg["snapshot_every"] or cfg["t_end"]
    rows = []
    for s in traj:
        if s.time == 0.0 or abs(s.time / every - round(s.time / every)) < 1e-9:
            idx = np.nonzero(s.f > cfg["threshold"])[0]
            rows.extend((s.time, int(i) + 1, float(s.f[i])) for i in idx)
    write_csv(out / "modeld_snapshots.csv", ["t", "i", "f_i"], rows)
    bound = [s.m0 <= 1.0 / -math.expm1(-s.time) for s in traj if s.time > 0]
    checks = {
        "m0_bound": all(bound),
        "mass_balance": all(abs(s.m1 - state0.m1 + s.mass_leak) < 1e-8 * state0.m1 for s in traj),
    }
    summary = {
        "N": n,
        "alpha": alpha,
        "lambda": lam,
        "times": [s.time for s in traj],
        "m0": [s.m0 for s in traj],
        "m1": [s.m1 for s in traj],
        "mass_leak": [s.mass_leak for s in traj],
        "profile_error": errs,
        "checks": checks,
    }
    write_json(out / "modeld.json", "modeld", cfg, summary)
    for s, e in zip(traj, errs):
        print(f"t={s.time:6.2f} m0={s.m0:.6f} leak={s.mass_leak:.3e} error={e if e is None else format(e, '.3e')}")
    if cfg["check"] and not all(checks.values()):
        return EXIT_FAIL
    return EXIT_OK


def cmd_invert(cfg: dict, out: Path) -> int:
    alpha = cfg["alpha"]
    curve = pr.build_profile(alpha)
    params = curve.params
    x = ev.geometric_grid(cfg["grid_min"], cfg["grid_max"], cfg["per_decade"])
    f = tr.invert_profile(curve, x)
    window = x[(x >= 0.1) & (x <= 10.0)]
    g = tr.invert_companion(curve, tr.companion_grid(curve))
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always", tr.TailTruncationWarning)
        f_sub = tr.subordinate(g, tr.StableKernel(alpha), window)
    write_csv(out / f"density_alpha{alpha:g}.csv", ["x", "f", "route"], f.rows() + f_sub.rows())
    decade = math.log10(cfg["grid_max"] / cfg["grid_min"])
    summary: dict[str, Any] = {"stehfest_order": f.order, "params": params.as_dict()}
    checks: dict[str, bool] = {}
    if decade >= 6:
        hi = tr.tail_exponent_fit(x, f.values, (cfg["grid_max"] / 1e3, cfg["grid_max"]))
        lo = tr.tail_exponent_fit(x, f.values, (cfg["grid_min"], cfg["grid_min"] * 1e3))
        summary["large_x"] = {"fitted": hi.exponent, "predicted": -(1.0 + alpha)}
        summary["small_x"] = {"fitted": lo.exponent, "predicted": -(1.0 - params.alpha_hat)}
        pref = f.values[-1] * x[-1] ** (1.0 + alpha)
        summary["large_x_prefactor"] = {"measured": pref, "predicted": alpha / math.gamma(1.0 - alpha)}
        checks["large_x_exponent"] = abs(hi.exponent + 1.0 + alpha) <= 0.05
        checks["small_x_exponent"] = abs(lo.exponent + 1.0 - params.alpha_hat) <= 0.05
        checks["large_x_prefactor"] = abs(pref / (alpha / math.gamma(1.0 - alpha)) - 1.0) <= 0.05
    if window.size:
        f_win = tr.invert_profile(curve, window)
        rel = float(np.max(np.abs(f_sub.values / f_win.values - 1.0)))
        summary["route_agreement"] = rel
        checks["routes_agree_1e-3"] = rel < 1e-3
    summary["checks"] = checks
    write_json(out / f"density_alpha{alpha:g}.json", "invert", cfg, summary)
    print(json.dumps({k: v for k, v in summary.items() if k != "params"}, default=float, sort_keys=True))
    if cfg["check"] and not all(checks.values()):
        return EXIT_FAIL
    return EXIT_OK


def cmd_check(cfg: dict, out: Path) -> int:
    numbers = acceptance.QUICK if cfg["quick"] else None
    results = []
    if cfg["quick"]:
        results.append(acceptance.logistic_check(cfg["seed"]))
        print(results[-1].line(), flush=True)
    for n in numbers or sorted(acceptance.CRITERIA):
        r = acceptance.run_criterion(n, cfg["seed"])
        print(r.line(), flush=True)
        results.append(r)
    # runtimes stay out of the JSON so reruns are byte-identical
    record = [{"criterion": r.number, "name": r.name, "passed": r.passed, "measured": r.measured} for r in results]
    write_json(out / "acceptance.json", "check", cfg, {"results": record})
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


COMMANDS = {
    "profile": cmd_profile,
    "evolve": cmd_evolve,
    "modeld": cmd_modeld,
    "invert": cmd_invert,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mergesplit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="flat key = value file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", help="seed of the random probes")
        keys = DEFAULTS[name]
        for key, flag in (
            ("alpha", "--alpha"),
            ("lambda", "--lambda"),
            ("n", "--n"),
            ("dt", "--dt"),
            ("t_end", "--t-end"),
            ("grid_min", "--grid-min"),
            ("grid_max", "--grid-max"),
            ("per_decade", "--per-decade"),
        ):
            if key in keys:
                p.add_argument(flag, dest=key)
        if "check" in keys:
            p.add_argument("--check", action="store_const", const="true", default=None)
        if "quick" in keys:
            p.add_argument("--quick", action="store_const", const="true", default=None)
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config is not None:
        for key, value in read_flat_config(args.config).items():
            if key not in cfg:
                raise ValidationError(f"{args.config}: parameter {key!r} does not apply to {command}")
            cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return {k: _coerce(k, v) for k, v in cfg.items()}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out or DEFAULTS[args.command]["out"])
    try:
        cfg = resolve_config(args.command, args)
        validate(args.command, cfg)
    except (ValidationError, ValueError, OSError) as exc:
        _failure(out, args.command, "validation", exc)
        return EXIT_INVALID
    out = Path(cfg["out"])
    try:
        return COMMANDS[args.command](cfg, out)
    except (MergeSplitError, ArithmeticError, FloatingPointError) as exc:
        _failure(out, args.command, "computation", exc)
        return EXIT_FAIL


def _failure(out: Path, command: str, kind: str, exc: BaseException) -> None:
    record = {"command": command, "failure": kind, "error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    try:
        write_json(out / f"{command}_failure.json", "failure", {}, record)
    except OSError:
        traceback.print_exc()


if __name__ == "__main__":
    sys.exit(main())
