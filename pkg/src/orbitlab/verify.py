"""Quick invariant checks, shared by the CLI ``verify`` command and the tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .billiards import closure_defect, reverse_state, trace_billiard
from .capacity import build_admissible, h_eps, h_eps_prime
from .flow import evaluate_quaternionic, solve_closed_form
from .geometry import (
    J_MAT,
    MagneticParams,
    TangentVector,
    construct_J,
    hopf_project,
    random_tangent,
    to_real,
    zp_action_tangent,
)
from .lens import LensSpace, geodesic_closing_time, is_zp_invariant, reeb_seed
from .reduced import PotentialSpec, ReducedState, conserved_set, integrate, reduced_params, to_reduced


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    limit: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.limit)


def _geometry(rng):
    worst = 0.0
    hop = 0.0
    for _ in range(50):
        t = random_tangent(rng)
        m = MagneticParams(rng.uniform(0, 0.3))
        J = construct_J(t, m)
        worst = max(worst, *J.defects().values())
        hop = max(hop, abs(np.linalg.norm(hopf_project(t.base)) - 0.5))
    return [Check("geometry", "J structure defects", worst, 1e-12),
            Check("geometry", "Hopf image on S^2(1/2)", hop, 1e-14)]


def _flow(rng):
    res, quat, equi = 0.0, 0.0, 0.0
    s = np.linspace(0, 20, 32)
    for _ in range(100):
        t = random_tangent(rng)
        m = MagneticParams(rng.uniform(0, 0.3))
        orb = solve_closed_form(t, m)
        res = max(res, float(orb.ode_residual(s).max()))
        quat = max(quat, float(np.abs(evaluate_quaternionic(t, m, s) - to_real(orb.position(s))).max()))
        # flow commutes with the deck group
        g = zp_action_tangent(t, 3, 1)
        moved = solve_closed_form(g, m).position(s)
        ref = to_real(orb.position(s)) @ LensSpace(3).deck(1).T
        equi = max(equi, float(np.abs(to_real(moved) - ref).max()))
    return [Check("flow", "ODE residual", res, 1e-10),
            Check("flow", "quaternionic form", quat, 1e-9),
            Check("flow", "Z_p equivariance", equi, 1e-10)]


def _reduced(rng):
    drift = 0.0
    for _ in range(3):
        eps = rng.uniform(0.05, 0.3)
        m = reduced_params(MagneticParams(eps))
        V = PotentialSpec(eps)
        th = rng.uniform(0.3, np.pi / 2 - 0.3)
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        r0 = ReducedState(th, 0.0, 0.0, d[0], d[1] / np.sin(th), d[2] / np.cos(th))
        tr = integrate(r0, m, V, 20.0, dt=0.5)
        q = tr.conserved(m, V)
        for key in ("energy", "c1", "c2"):
            v = q[key]
            drift = max(drift, float(np.abs(v - v[0]).max() / max(abs(v[0]), 1e-3)))
    return [Check("reduced", "relative drift of E+V, c1, c2", drift, 1e-8)]


def _billiards(rng):
    cons, rev = 0.0, 0.0
    eps = 0.2
    m = MagneticParams(eps)
    n = 0
    while n < 20:
        t = random_tangent(rng, speed=1.0)
        th = np.arccos(abs(t.x[1]))
        if not (eps < th < np.pi / 2 - eps):
            continue
        n += 1
        orb = trace_billiard(t, m, eps, 30.0)
        for e in orb.events:
            a, b = to_reduced(e.state_in), to_reduced(e.state_out)
            ca, cb = conserved_set(a, m), conserved_set(b, m)
            cons = max(cons, abs(ca.c1 - cb.c1), abs(ca.c2 - cb.c2), abs(a.theta_dot + b.theta_dot),
                       abs(e.state_in.delta - e.state_out.delta))
        back = trace_billiard(reverse_state(orb.final_state), MagneticParams(-eps), eps, 30.0)
        rev = max(rev, closure_defect(back.final_state, reverse_state(t)))
    return [Check("billiards", "reflection conserves c1, c2, delta", cons, 1e-9),
            Check("billiards", "reversibility", rev, 1e-8)]


def _lens(rng):
    err = 0.0
    for p in (3, 5, 7):
        L = LensSpace(p)
        t = random_tangent(rng, speed=1.0)
        x = t.base
        jt = TangentVector(x, J_MAT @ x.coords)
        err = max(err, abs(geodesic_closing_time(jt, L) - 2 * np.pi / p),
                  abs(geodesic_closing_time(t, L) - 2 * np.pi))
    orb = solve_closed_form(reeb_seed("+", 1.0), MagneticParams(0.2))
    inv = 0.0 if all(is_zp_invariant(orb, LensSpace(p), 2 * np.pi) for p in (1, 3, 5, 7)) else 1.0
    return [Check("lens", "geodesic closing times", err, 1e-9),
            Check("lens", "Reeb orbit Z_p invariant", inv, 0.0)]


def _capacity(rng):
    jump = 0.0
    for e in rng.uniform(1e-3, 0.49, 100):
        y = e / 2
        lin = 2 * np.pi * (y / np.sqrt(e) + np.sqrt(e) / 2)
        jump = max(jump, abs(lin - h_eps(y, e)),
                   abs(2 * np.pi / np.sqrt(e) - 2 * np.pi / np.sqrt(2 * y)), abs(h_eps_prime(y, e) - 2 * np.pi / np.sqrt(e)))
    f = build_admissible(0.05, 0.01)
    u = np.linspace(f.a, f.b, 10001)
    slope = float(np.max(np.diff(f.f(u)) / np.diff(u)) - f.s_max)
    return [Check("capacity", "h junction continuity", jump, 1e-12),
            Check("capacity", "f slope above s_max", max(slope, 0.0), 1e-9)]


SUITES = {
    "geometry": _geometry,
    "flow": _flow,
    "reduced": _reduced,
    "billiards": _billiards,
    "lens": _lens,
    "capacity": _capacity,
}


def run_suite(name: str = "all", seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    names = list(SUITES) if name == "all" else [name]
    out = []
    for n in names:
        if n not in SUITES:
            raise KeyError(n)
        out += SUITES[n](rng)
    return out
