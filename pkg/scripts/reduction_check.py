"""Amplitude-equation prediction versus direct simulation just above k_H.

Integrates the GL equation to its attractor, reconstructs the oscillator
amplitude over one carrier period and compares with a long direct run from
small noise. Repeats for several r to show the O(1/N) error trend.

    python scripts/reduction_check.py --n 50 --r 0.25,0.5,1,2
"""

import argparse
import json

import numpy as np

from ringchaos.amplitude import gl_coefficients, reconstruct
from ringchaos.glsolver import GLField, gl_integrate
from ringchaos.model import DuffingRingParams, make_duffing_ring
from ringchaos.scan import DuffingFamily, find_k_hopf
from ringchaos.simulate import advance, integrate
from ringchaos.spectrum import find_critical


def predicted_amplitude(coeffs, crit, r, N, grid=64, t_gl=60.0, seed=0):
    u, _ = gl_integrate(GLField.random(grid, 1e-3, seed=seed), r, coeffs, t_gl, 1e-2)
    ts = np.linspace(0, 2 * np.pi / crit.omega0, 64)
    return max(np.abs(reconstruct(coeffs, u, 1.0 / N, t)[0::2]).max() for t in ts), np.abs(u.values).mean()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--r", default="0.5")
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--d", type=float, default=0.3)
    ap.add_argument("--t-transient", type=float, default=7e4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    N = args.n
    m = make_duffing_ring(DuffingRingParams(args.a, args.d), N)
    crit = find_critical(m, (0.0, 1.0))
    coeffs = gl_coefficients(m, crit)
    k_H = find_k_hopf(DuffingFamily(args.a, args.d), N)
    rows = []
    for r in (float(x) for x in args.r.split(",")):
        k = k_H + r / N**2
        pred, u_mean = predicted_amplitude(coeffs, crit, r, N, seed=args.seed)
        y0 = np.random.default_rng(args.seed).normal(scale=1e-3, size=m.dim)
        # growth rate is r/N^2 * Re kappa2, so the transient must scale like N^2/r
        y = advance(m, y0, k, args.t_transient * 0.5 / r)
        direct = float(np.abs(integrate(m, y, k, 200.0, 0.01, stride=5).states[:, 0::2]).max())
        rel = (pred - direct) / direct
        print(f"r={r:<5g} k={k:.8f} |u|={u_mean:.4f} predicted={pred:.5f} direct={direct:.5f} rel={rel:+.3f}",
              flush=True)
        rows.append({"r": r, "k": k, "predicted": pred, "direct": direct, "rel": rel})
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"N": N, "k_H": k_H, "rows": rows}, fh, indent=1)


if __name__ == "__main__":
    main()
