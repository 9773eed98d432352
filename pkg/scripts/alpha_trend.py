"""Median smooth cap-entry angle against eps, with a log-log slope."""
import argparse

import numpy as np

from orbitlab.billiards import CapGeometry, caps_reached, smooth_cap_angle
from orbitlab.flow import hopf_radius
from orbitlab.geometry import MagneticParams, random_tangent


def sample(eps, n, rng):
    m = MagneticParams(eps)
    rmin = 0.5 * np.sin((np.sqrt(eps) + eps) / 2)
    out = []
    while len(out) < n:
        t = random_tangent(rng)
        th = np.arccos(abs(t.x[1]))
        if not eps < th < np.pi / 2 - eps:
            continue
        caps = caps_reached(t, m, eps)
        if len(caps) != 1 or hopf_radius(t.speed, t.delta, m) <= rmin:
            continue
        out.append(smooth_cap_angle(t, m, CapGeometry(eps, caps.pop())))
    return np.array(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, nargs="+", default=[0.3, 0.2, 0.1, 0.05, 0.02])
    ap.add_argument("-n", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    med = []
    for eps in args.eps:
        a = sample(eps, args.n, rng)
        med.append(np.median(a))
        print(f"eps={eps:<5} median={med[-1]:.5f} q10={np.quantile(a, .1):.5f} q90={np.quantile(a, .9):.5f}")
    print(f"log-log slope {np.polyfit(np.log(args.eps), np.log(med), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
