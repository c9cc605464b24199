"""Chaos onset of the Duffing ring at a single ring size.

Scans k upward from k_H by attractor continuation, prints every sample and
writes the scan (labels and leading exponents per k) to JSON.

    python scripts/chaos_onset.py --n 30 --profile production --out results/onset_N30.json
"""

import argparse
import json
import time

from ringchaos.scan import DuffingFamily, find_k_chaos, find_k_hopf, first_positive_crossings
from ringchaos.simulate import AttractorProtocol


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--d", type=float, default=0.3)
    ap.add_argument("--profile", default="production")
    ap.add_argument("--num-exponents", type=int, default=2)
    ap.add_argument("--k-step", type=float, default=1e-3)
    ap.add_argument("--hyper-span", type=float, default=0.02, help="continue past onset to find k_hyper")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    family = DuffingFamily(args.a, args.d)
    protocol = AttractorProtocol.profile(args.profile, num_exponents=args.num_exponents)
    t0 = time.time()
    k_H = find_k_hopf(family, args.n)
    print(f"N={args.n} k_H={k_H:.10f}", flush=True)
    res = find_k_chaos(family, args.n, k_H + args.k_step, protocol, k_step=args.k_step, seed=args.seed,
                      hyper_span=args.hyper_span)
    for k, label, ex in res.samples:
        print(f"{k:.5f} {label:>13} {ex}")
    crossings = first_positive_crossings(res.samples, protocol.chaos_threshold)
    summary = {"N": args.n, "k_H": k_H, "k_Ch": res.k_Ch, "bracket": res.bracket, "k_hyper": res.k_hyper,
               "first_positive": crossings, "profile": args.profile, "seconds": time.time() - t0,
               "samples": res.samples}
    print(json.dumps({k: v for k, v in summary.items() if k != "samples"}))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(summary, fh, indent=1)


if __name__ == "__main__":
    main()
