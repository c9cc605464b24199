"""Onset of spatio-temporal chaos in the reduced GL equation.

Scans r upward from the destabilisation of u = 0 and reports the divergence
rate of nearby fields. Runs with the ring's own coefficients and, with
--dispersion, with kappa3 replaced by the dispersion curvature.

    python scripts/gl_transition.py --r-max 20 --grid 64
"""

import argparse
import json

from ringchaos.amplitude import gl_coefficients
from ringchaos.model import DuffingRingParams, make_duffing_ring
from ringchaos.scan import GLProtocol, gl_transition_interval
from ringchaos.spectrum import find_critical


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--d", type=float, default=0.3)
    ap.add_argument("--r-max", type=float, default=20.0)
    ap.add_argument("--r-step", type=float, default=2.0)
    ap.add_argument("--grid", type=int, default=64)
    ap.add_argument("--dt", type=float, default=2e-3)
    ap.add_argument("--t-measure", type=float, default=10.0)
    ap.add_argument("--dispersion", action="store_true")
    ap.add_argument("--out")
    args = ap.parse_args()

    m = make_duffing_ring(DuffingRingParams(args.a, args.d), 30)
    coeffs = gl_coefficients(m, find_critical(m, (0.0, 1.0)))
    if args.dispersion:
        coeffs = coeffs.with_dispersion_kappa3()
    c1 = coeffs.kappa3.imag / coeffs.kappa3.real
    c2 = coeffs.zeta.imag / coeffs.zeta.real
    print(f"kappa2={coeffs.kappa2:.4f} kappa3={coeffs.kappa3:.4f} zeta={coeffs.zeta:.4f}")
    print(f"1 + c1 c2 = {1 + c1 * c2:+.4f} (negative means plane waves are Benjamin-Feir unstable)")
    proto = GLProtocol(grid=args.grid, dt=args.dt, t_transient=args.t_measure, t_measure=args.t_measure,
                       r_step=args.r_step)
    res = gl_transition_interval(coeffs, (0.0, args.r_max), proto)
    for r, lam in res.rates:
        print(f"r={r:7.3f} rate={lam:+.4f}", flush=True)
    if res.delta_r is None:
        print(f"no chaos up to r={args.r_max}")
    else:
        print(f"r0={res.r0:.4f} r_chaos={res.r_chaos:.3f} delta_r={res.delta_r:.3f} "
              f"-> width at N=30: {res.predicted_width(30):.5f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"r0": res.r0, "r_chaos": res.r_chaos, "delta_r": res.delta_r, "rates": res.rates,
                       "dispersion_kappa3": args.dispersion}, fh, indent=1)


if __name__ == "__main__":
    main()
