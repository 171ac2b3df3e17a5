"""Ratio-test radius of the profile series against its proven bounds.

    python scripts/radius_diagnostics.py --terms 400

For each alpha: the quartile-averaged radius, the 1/n-extrapolated one, the
bounds ``(1-alpha)/(1+alpha)`` and ``a_2``, and the depth-5 complete
monotonicity verdict of ``c_{n+1} R**n`` at both radii.
"""
import argparse

import numpy as np

from mergesplit import series as ser


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--terms", type=int, default=400)
    ap.add_argument("--alphas", type=float, nargs="+", default=list(np.round(np.linspace(0.05, 0.95, 10), 3)))
    args = ap.parse_args()
    print(f"{'alpha':>6} {'lower':>9} {'R avg':>11} {'R extrap':>11} {'a_2':>9} {'b (1/n)':>9} {'CM avg':>7} {'CM ext':>7}")
    for a in args.alphas:
        data = ser.coefficients(float(a), args.terms)
        d = ser.ratio_diagnostics(data)
        r_ext = d["extrapolated_radius"]
        cm_avg = ser.gamma_star_cm_check(data, 5).ok
        cm_ext = ser.gamma_star_cm_check(data, 5, radius=r_ext).ok
        print(
            f"{a:6.3f} {(1 - a) / (1 + a):9.5f} {data.radius_est:11.7f} {r_ext:11.7f} "
            f"{data.denoms[1]:9.5f} {d['one_over_n_coefficient']:9.2e} {str(cm_avg):>7} {str(cm_ext):>7}"
        )


if __name__ == "__main__":
    main()
