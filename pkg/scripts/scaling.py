"""k_Ch - k_H versus ring size, and the rescaled gap k_Re = (k_Ch - k_H) N^2.

One continuation scan per N; cells run in a process pool unless --workers 1.

    python scripts/scaling.py --n-list 10,15,20,25,30 --profile production --out results/scaling.csv
"""

import argparse
import csv
import json
import time

from ringchaos.scan import DuffingFamily, scaling_experiment, scaling_summary
from ringchaos.simulate import AttractorProtocol


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-list", default="10,15,20,25,30")
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--d", type=float, default=0.3)
    ap.add_argument("--profile", default="production")
    ap.add_argument("--k-step", type=float, default=1e-3)
    ap.add_argument("--hyper-span", type=float, default=0.0)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    Ns = [int(x) for x in args.n_list.split(",")]
    t0 = time.time()
    recs = scaling_experiment(DuffingFamily(args.a, args.d), Ns, AttractorProtocol.profile(args.profile),
                              k_step=args.k_step, seed=args.seed, hyper_span=args.hyper_span,
                              workers=args.workers)
    print(f"{'N':>4} {'k_H':>12} {'k_Ch':>10} {'k_Re':>8}")
    prev = None
    for r in recs:
        gap = r.k_Ch - r.k_H
        trend = "" if prev is None else ("down" if gap < prev else "UP")
        print(f"{r.N:>4} {r.k_H:12.8f} {r.k_Ch:10.5f} {r.k_Re:8.3f}  {trend}")
        prev = gap
    summary = scaling_summary(recs)
    print(json.dumps(summary), f"({time.time() - t0:.0f}s)")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "k_H", "k_Ch", "k_Re"])
            w.writerows(r.row() for r in recs)


if __name__ == "__main__":
    main()
