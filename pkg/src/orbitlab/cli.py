"""Command-line front end: ``python3 -m orbitlab <command> ...``.

Time series are written as CSV with one ``#``-prefixed JSON header line holding
the full run configuration; census streams as JSON lines.  Floats carry 17
significant digits.  Exit codes: 0 success, 1 verification failure, 2 usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .billiards import CapGeometry, caps_reached, cap_entry_angle, smooth_cap_angle, trace_billiard
from .capacity import certify_lower_bound, h_eps, h_eps_prime
from .errors import NoIntersection, OrbitLabError
from .flow import evaluate, hopf_radius, solve_closed_form
from .geometry import (
    I_MAT,
    MagneticParams,
    TangentVector,
    hopf_project,
    random_point,
    random_tangent,
)
from .lens import LensSpace, lens_short_orbit_scan, reeb_seed, zp_symmetric_bounce_scan
from .reduced import conserved_set, reduced_params, to_reduced
from .verify import run_suite

log = logging.getLogger("orbitlab")

FIGURES = ("hopf", "bounce", "zp", "heps", "capangle")
CENSUS_CHUNKS = 8


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else repr(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _header(config: dict) -> str:
    return "# " + json.dumps(_jsonable({"artifact_version": __version__, **config}), sort_keys=True)


def write_csv(path, config: dict, columns: list, rows) -> None:
    lines = [_header(config), ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def read_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise UsageError(f"{path} has no metadata header")
    return json.loads(first[2:])


def workers() -> int:
    try:
        return max(1, int(os.environ.get("ORBITLAB_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, tasks):
    """Order-preserving map, parallel when ORBITLAB_THREADS > 1."""
    n = workers()
    if n == 1 or len(tasks) < 2:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as ex:
        futs = [ex.submit(fn, *t) for t in tasks]
        return [f.result() for f in futs]


# -- commands ---------------------------------------------------------------------

def _launch(args, rng) -> TangentVector:
    speed = 1.0 if args.unit_speed or args.speed is None else args.speed
    if speed <= 0:
        raise UsageError("--speed must be positive")
    if args.reeb:
        return reeb_seed("+", speed)
    x = random_point(rng)
    if args.delta is None:
        return random_tangent(rng, speed=speed, x=x)
    if abs(args.delta) > speed:
        raise UsageError("|--delta| must not exceed the speed")
    xc = x.coords
    ix = I_MAT @ xc
    u = rng.standard_normal(4)
    u -= (u @ xc) * xc + (u @ ix) * ix
    u /= np.linalg.norm(u)
    return TangentVector(x, args.delta * ix + np.sqrt(speed ** 2 - args.delta ** 2) * u)


STATE_COLUMNS = ["t", "x0", "x1", "x2", "x3", "v0", "v1", "v2", "v3", "theta", "phi1", "phi2",
                 "hopf_x", "hopf_y", "hopf_z", "c", "delta", "c1", "c2"]


def _state_row(s, st: TangentVector, m: MagneticParams):
    z = st.x
    theta = float(np.arccos(np.clip(abs(z[1]), 0.0, 1.0)))
    phi1, phi2 = float(np.angle(z[0])), float(np.angle(z[1]))
    h = hopf_project(st.base)
    # c1, c2 in the reduced normalisation, whose coupling is -eps/2 (see reduced.ambient_params)
    mr = reduced_params(m)
    if 1e-12 < theta < np.pi / 2 - 1e-12:
        cs = conserved_set(to_reduced(st), mr)
        c1v, c2v = cs.c1, cs.c2
    elif abs(z[1]) < abs(z[0]):
        c1v, c2v = st.delta + mr.epsilon, 0.0  # on gamma_+
    else:
        c1v, c2v = 0.0, st.delta + mr.epsilon
    return [s, *st.base.coords, *st.vec, theta, phi1, phi2, *h, st.speed, st.delta, c1v, c2v]


def cmd_orbit(args) -> int:
    rng = np.random.default_rng(args.seed)
    m = MagneticParams(args.epsilon)
    t0 = _launch(args, rng)
    orbit = solve_closed_form(t0, m)
    ts = np.linspace(0.0, args.t_end, args.samples)
    rows = [_state_row(s, evaluate(orbit, s), m) for s in ts]
    write_csv(args.out, _config(args), STATE_COLUMNS, rows)
    return 0


def cmd_billiard(args) -> int:
    rng = np.random.default_rng(args.seed)
    m = MagneticParams(args.epsilon)
    wall = args.wall_eps if args.wall_eps is not None else abs(args.epsilon)
    if not 0 < wall < np.pi / 4:
        raise UsageError("--wall-eps must lie in (0, pi/4)")
    while True:
        t0 = _launch(args, rng)
        th = float(np.arccos(np.clip(abs(t0.x[1]), 0.0, 1.0)))
        if wall < th < np.pi / 2 - wall:
            break
    orbit = trace_billiard(t0, m, wall, args.t_end)
    ts = np.linspace(0.0, args.t_end, args.samples)
    events = {e.time for e in orbit.events}
    grid = sorted(set(ts.tolist()) | events)
    rows = [_state_row(s, orbit.evaluate(s), m) + [int(s in events)] for s in grid]
    cfg = _config(args)
    cfg["bounce_type"] = orbit.type
    cfg["n_events"] = len(orbit.events)
    write_csv(args.out, cfg, STATE_COLUMNS + ["event"], rows)
    return 0


def _census_chunk(kind, p, eps, n, seed, wall):
    L, m = LensSpace(p), MagneticParams(eps)
    if kind == "geodesic":
        return [r.to_dict() for r in lens_short_orbit_scan(L, m, n_seeds=n, seed=seed)]
    return [r.to_dict() for r in zp_symmetric_bounce_scan(L, m, wall, n_seeds=n, seed=seed,
                                                          include_plain=True)]


def cmd_census(args) -> int:
    ss = np.random.SeedSequence(args.seed)
    # fixed chunking keeps the output independent of the worker count
    chunks = CENSUS_CHUNKS
    children = [int(c.generate_state(1)[0]) for c in ss.spawn(chunks)]
    per = [args.budget // chunks + (1 if i < args.budget % chunks else 0) for i in range(chunks)]
    wall = args.wall_eps if args.wall_eps is not None else args.epsilon
    tasks = [(args.kind, args.p, args.epsilon, per[i], children[i], wall) for i in range(chunks)]
    results = _pmap(_census_chunk, tasks)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", encoding="utf-8")
    try:
        out.write(_header(_config(args)) + "\n")
        for idx, chunk in enumerate(results):
            for rec in sorted(chunk, key=lambda r: (r["period"], r["seed"])):
                rec["chunk"] = idx
                out.write(json.dumps(_jsonable(rec), sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_verify(args) -> int:
    try:
        checks = run_suite(args.suite, args.seed)
    except KeyError as exc:
        raise UsageError(f"unknown suite {exc}") from None
    bad = 0
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'} [{c.suite}] {c.name}: {c.value:.3e} (limit {c.limit:.1e})")
        bad += not c.ok
    return 1 if bad else 0


def cmd_capacity(args) -> int:
    est = certify_lower_bound(LensSpace(args.p), args.epsilon, search_budget=args.budget, seed=args.seed,
                              margin=args.margin, include_plain=not args.symmetric_only)
    record = {"config": _config(args), "estimate": est.to_dict()}
    print(json.dumps(_jsonable(record), sort_keys=True))
    print(est.verdict())
    return 0 if est.passed else 1


# -- figure datasets ----------------------------------------------------------------

def _fig_hopf(args, rng):
    m = MagneticParams(args.epsilon)
    rows = [["pole", 0, 0.0, 0.0, 0.0, 0.5], ["pole", 1, 0.0, 0.0, 0.0, -0.5]]
    for k in range(6):
        t = random_tangent(rng, speed=1.0)
        orbit = solve_closed_form(t, m)
        T = 2 * np.pi / orbit.rotation_frequency
        for s in np.linspace(0.0, T, 97):
            rows.append(["circle", k, s, *hopf_project(orbit.position(s))])
    return ["kind", "curve", "t", "hopf_x", "hopf_y", "hopf_z"], rows


def _fig_bounce(args, rng):
    eps = args.epsilon if args.epsilon > 0 else 0.2
    m = MagneticParams(eps)
    wall = eps
    rows, found = [], {}
    while len(found) < 3:
        t = random_tangent(rng, speed=1.0)
        th = float(np.arccos(abs(t.x[1])))
        if not wall < th < np.pi / 2 - wall:
            continue
        orbit = trace_billiard(t, m, wall, 12.0)
        found.setdefault(orbit.type, orbit)
    for typ in sorted(found):
        orbit = found[typ]
        times = sorted(set(np.linspace(0, 12.0, 241).tolist()) | {e.time for e in orbit.events})
        ev = {e.time for e in orbit.events}
        for s in times:
            rows.append([typ, s, *hopf_project(orbit.positions(np.array([s]))[0]), int(s in ev)])
    return ["type", "t", "hopf_x", "hopf_y", "hopf_z", "event"], rows


def _fig_zp(args, rng):
    p = args.p
    L = LensSpace(p)
    rows = []
    for k in range(p + 1):
        rows.append(["domain", k, 0, 2 * np.pi * k / p, 0.0])
    eps = args.epsilon if args.epsilon > 0 else 0.1
    recs = zp_symmetric_bounce_scan(L, MagneticParams(eps), eps, n_seeds=16, seed=args.seed)
    recs = [r for r in recs if r.zp_invariant][:2]
    for j, rec in enumerate(recs):
        t0 = rec.tangent()
        orbit = trace_billiard(t0, MagneticParams(eps), eps, p * rec.period)
        for s in np.linspace(0, p * rec.period, 64 * p):
            z = orbit.positions(np.array([s]))[0]
            rows.append(["orbit", j, s, float(np.mod(np.angle(z[0]), 2 * np.pi)), float(np.mod(np.angle(z[1]), 2 * np.pi))])
    return ["kind", "id", "t", "phi1", "phi2"], rows


def _fig_heps(args, rng):
    eps = args.epsilon if args.epsilon > 0 else 0.1
    ys = np.linspace(0.0, 0.6, 601)
    return ["y", "h", "dh"], [[y, h_eps(y, eps), h_eps_prime(y, eps)] for y in ys]


def _fig_capangle(args, rng):
    eps = args.epsilon if args.epsilon > 0 else 0.1
    m = MagneticParams(eps)
    rows = []
    tries = 0
    while len(rows) < args.samples and tries < 100 * args.samples:
        tries += 1
        t = random_tangent(rng, speed=1.0)
        th = float(np.arccos(abs(t.x[1])))
        if not eps < th < np.pi / 2 - eps:
            continue
        caps = caps_reached(t, m, eps)
        if len(caps) != 1:
            continue
        cap = CapGeometry(eps, caps.pop())
        orbit = solve_closed_form(t, m)
        pts = hopf_project(orbit.position(np.linspace(0, 2 * np.pi / orbit.rotation_frequency, 64, endpoint=False)))
        centre = pts.mean(axis=0)
        R = hopf_radius(t.speed, t.delta, m)
        d = float(np.linalg.norm(centre - cap.center))
        try:
            formula = cap_entry_angle(R, d, cap.r)
        except NoIntersection:
            formula = float("nan")
        rows.append([R, cap.r, d, smooth_cap_angle(t, m, cap), formula])
    return ["R", "r", "d", "alpha_measured", "alpha_planar"], rows


def cmd_plotdata(args) -> int:
    if args.figure not in FIGURES:
        raise UsageError(f"unknown figure {args.figure!r}; choose from {', '.join(FIGURES)}")
    rng = np.random.default_rng(args.seed)
    cols, rows = globals()[f"_fig_{args.figure}"](args, rng)
    write_csv(args.out, _config(args), cols, rows)
    return 0


def cmd_rerun(args) -> int:
    head = read_header(args.file)
    argv = head.get("argv")
    if not argv:
        raise UsageError("header carries no argv")
    argv = list(argv)
    if "--out" in argv:
        argv[argv.index("--out") + 1] = args.out
    else:
        argv += ["--out", args.out]
    return main(argv)


# -- parser ---------------------------------------------------------------------------

_ARGV: list = []


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    cfg["argv"] = [a for a in _ARGV]
    return cfg


def _common(p, eps_default=0.0):
    p.add_argument("--epsilon", type=float, default=eps_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbitlab", description="Magnetic geodesics and billiards on S^3 and L(p;1).")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")

    def launch(p):
        p.add_argument("--unit-speed", action="store_true")
        p.add_argument("--speed", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--reeb", action="store_true", help="launch along gamma_+ in the Reeb direction")
        p.add_argument("--t-end", type=float, default=20.0)
        p.add_argument("--samples", type=int, default=201)

    p = sub.add_parser("orbit", help="closed-form magnetic geodesic time series")
    _common(p)
    launch(p)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("billiard", help="magnetic billiard trajectory with event markers")
    _common(p, 0.2)
    launch(p)
    p.add_argument("--wall-eps", type=float)
    p.set_defaults(func=cmd_billiard)

    p = sub.add_parser("census", help="periodic-orbit census on L(p;1) as JSON lines")
    _common(p, 0.1)
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--kind", choices=("geodesic", "bounce"), default="geodesic")
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--wall-eps", type=float)
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--suite", default="all")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("capacity", help="capacity lower-bound pipeline")
    _common(p, 0.05)
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--budget", type=int, default=20000)
    p.add_argument("--margin", type=float)
    p.add_argument("--symmetric-only", action="store_true",
                   help="leave out bounce orbits that close without a deck shift")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("plotdata", help="datasets behind the figures")
    _common(p, 0.1)
    p.add_argument("--figure", required=True)
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--samples", type=int, default=200)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("rerun", help="reproduce an output file from its header")
    p.add_argument("file")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    global _ARGV
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    if not argv:
        ap.print_usage(sys.stderr)
        return 2
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _ARGV = argv
    start = time.perf_counter()
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"orbitlab {args.command}: {exc}", file=sys.stderr)
        return 2
    except OrbitLabError as exc:
        mod = type(exc).__module__
        print(f"orbitlab {args.command}: {type(exc).__name__} ({mod}): {exc}; parameters {_config(args)}",
              file=sys.stderr)
        return 2
    log.info("%s finished in %.3f s", args.command, time.perf_counter() - start)
    return code
