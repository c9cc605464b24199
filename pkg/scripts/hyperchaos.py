"""Lyapunov spectrum deep in the chaotic regime (default N=30, k=0.8).

Prints the leading exponents, the count above threshold and a standard error
from batch means over the tail of the convergence history.

    python scripts/hyperchaos.py --n 30 --k 0.8 --num 24 --out results/hyper_N30.json
"""

import argparse
import json
import time

import numpy as np

from ringchaos.model import DuffingRingParams, make_duffing_ring
from ringchaos.simulate import lyapunov_spectrum


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--k", type=float, default=0.8)
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--d", type=float, default=0.3)
    ap.add_argument("--num", type=int, default=24)
    ap.add_argument("--t-transient", type=float, default=5e3)
    ap.add_argument("--t-total", type=float, default=5e4)
    ap.add_argument("--threshold", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    m = make_duffing_ring(DuffingRingParams(args.a, args.d), args.n)
    t0 = time.time()
    res = lyapunov_spectrum(m, args.k, args.num, t_transient=args.t_transient, t_total=args.t_total,
                            seed=args.seed)
    se = res.standard_error()
    for i, (lam, s) in enumerate(zip(res.exponents, se), 1):
        print(f"{i:3d} {lam:+.5f} +- {s:.5f}")
    n_pos = res.count_positive(args.threshold)
    # exponents whose sign is not resolved by the batch error
    marginal = int(np.sum(np.abs(res.exponents - args.threshold) < 2 * se))
    print(f"positive (> {args.threshold:g}): {n_pos}, marginal: {marginal}, {time.time() - t0:.0f}s")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"N": args.n, "k": args.k, "positive": n_pos, "marginal": marginal,
                       **res.to_json()}, fh, indent=1)


if __name__ == "__main__":
    main()
