"""Rescaled distance to the profile along the evolution, three schemes side by side.

    python scripts/orbit_convergence.py --alpha 0.5 --t-end 20

Columns: plain IMEX, Richardson in time, and the space-time extrapolation.
Data are the pure power ``s**alpha``, which lies in the profile's basin.
"""
import argparse
import math

from mergesplit import evolution as ev
from mergesplit.profile import build_profile


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--t-end", type=float, default=20.0)
    ap.add_argument("--dt", type=float, default=1e-2)
    ap.add_argument("--per-decade", type=int, default=40)
    ap.add_argument("--grid-min", type=float, default=1e-20)
    args = ap.parse_args()

    prof = build_profile(args.alpha)
    spec = ev.GridSpec(args.grid_min, 1e8, args.per_decade)
    times = [float(t) for t in range(int(args.t_end) + 1)]
    data = lambda s: s**args.alpha
    u0 = ev.GridFunction.from_callable(data, spec.build())
    plain = ev.evolve(u0, args.t_end, args.dt, snapshot_times=times)
    rich = ev.evolve(u0, args.t_end, args.dt, snapshot_times=times, richardson=True)
    ext = ev.evolve_extrapolated(data, spec, args.t_end, args.dt, snapshot_times=times)

    print(f"alpha={args.alpha} beta={prof.beta:.6f} grid={spec}")
    print(f"{'t':>5} {'plain':>11} {'richardson':>11} {'space-time':>11} {'m0':>9}")
    for a, b, c in zip(plain, rich, ext):
        errs = [ev.rescaled_error(x, prof) for x in (a, b, c)]
        m0 = c.m0 if math.isfinite(c.m0) else float("inf")
        print(f"{a.time:5.1f} " + " ".join(f"{e:11.3e}" for e in errs) + f" {m0:9.4g}")


if __name__ == "__main__":
    main()
