"""Run the capacity pipeline over p and eps and fit the eps -> 0 limit.

    python3 scripts/capacity_sweep.py --budget 2000 --bounce-fraction 0.005
"""
import argparse
import json

import numpy as np

from orbitlab.capacity import certify_lower_bound
from orbitlab.lens import LensSpace


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, nargs="+", default=[1, 3, 5])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.02])
    ap.add_argument("--budget", type=int, default=2000)
    ap.add_argument("--bounce-fraction", type=float, default=0.005)
    ap.add_argument("--json", help="write all estimates here")
    args = ap.parse_args()

    out = []
    for p in args.p:
        osc = []
        for eps in args.eps:
            est = certify_lower_bound(LensSpace(p), eps, search_budget=args.budget, seed=p,
                                      bounce_fraction=args.bounce_fraction)
            osc.append(est.oscillation)
            out.append(est.to_dict())
            print(f"p={p} eps={eps}: {est.verdict()}")
        if len(args.eps) > 1:
            slope, icpt = np.polyfit(args.eps, osc, 1)
            print(f"p={p}: linear intercept {icpt:.4f} vs 2pi = {2 * np.pi:.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=1)


if __name__ == "__main__":
    main()
