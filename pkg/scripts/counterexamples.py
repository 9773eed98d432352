"""Print the chord librations and collar relative equilibria of E + V_eps.

Both families have clocked period below one, which is why the capacity
pipeline cannot certify pass = true for eps > 0.

    python3 scripts/counterexamples.py [--eps 0.1 0.05] [--skip-chords]
"""
import argparse
import math

from orbitlab.probes import chord_orbit, collar_equilibrium


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.02])
    ap.add_argument("--p", type=int, nargs="+", default=[1, 3, 5])
    ap.add_argument("--skip-chords", action="store_true", help="chords at small eps need a minute or more each")
    args = ap.parse_args()

    if not args.skip_chords:
        print("chord librations (rim speed 1 - 2 eps)")
        for eps in args.eps:
            o = chord_orbit(eps, speed=1 - 2 * eps)
            print(f"  eps={eps:<5} period={o.period:.6f} scaled={o.scaled_period:.4f} defect={o.defect:.1e}")
    print("collar relative equilibria (speed 0.5)")
    for eps in args.eps:
        for p in args.p:
            o = collar_equilibrium(eps, p, speed=0.5)
            if o is None:
                print(f"  eps={eps:<5} p={p}: root below float resolution")
                continue
            depth = o.state.theta - (math.pi / 2 - eps)
            print(f"  eps={eps:<5} p={p} depth={depth:.2e} bracket={o.bracket:.1e} "
                  f"scaled period={o.scaled_period:.4f}")


if __name__ == "__main__":
    main()
