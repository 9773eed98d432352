import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import seeds
from orbitlab.billiards import (
    CapGeometry,
    cap_entry_angle,
    closure_defect,
    find_periodic_bounce,
    mirror_extension,
    reflect,
    reverse_state,
    theta_dot,
    trace_billiard,
    wall_state,
    which_cap_contact,
)
from orbitlab.errors import GeometryError, NoIntersection
from orbitlab.flow import evaluate, solve_closed_form
from orbitlab.geometry import MagneticParams, random_tangent
from orbitlab.reduced import ReducedState, conserved_set, from_reduced, to_reduced


def _inside(rng, w, speed=1.0):
    while True:
        t = random_tangent(rng, speed=speed)
        th = np.arccos(abs(t.x[1]))
        if w < th < np.pi / 2 - w:
            return t


@given(st.floats(0.01, 0.7))
def test_cap_radius_in_range(w):
    for which in ("north", "south"):
        r = CapGeometry(w, which).r
        assert 0 < r < 0.5


def test_normal_incidence_reverses_velocity():
    cap = CapGeometry(0.2, "north")
    t = from_reduced(ReducedState(np.pi / 2 - 0.2, 0.4, 1.0, 0.8, 0.0, 0.0))
    out = reflect(t, cap)
    assert np.allclose(out.vec, -t.vec, atol=1e-14)


def test_reflect_rejects_bad_input():
    cap = CapGeometry(0.2, "north")
    with pytest.raises(GeometryError):
        reflect(from_reduced(ReducedState(0.7, 0, 0, 1.0, 0, 0)), cap)
    leaving = from_reduced(ReducedState(np.pi / 2 - 0.2, 0, 0, -0.8, 0.1, 0.1))
    with pytest.raises(GeometryError):
        reflect(leaving, cap)


@given(st.sampled_from(["north", "south"]), st.floats(0.05, 0.4), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(0, 6.28), st.floats(0, 6.28))
def test_reflection_conserves_integrals(which, w, a, b, p1, p2):
    cap = CapGeometry(w, which)
    out = wall_state(cap, 1.0, a, b, p1, p2)
    if out is None:
        return
    incoming = reverse_state(out)
    # an incoming state has the opposite theta'; flip the angular part back
    r = to_reduced(incoming)
    incoming = from_reduced(ReducedState(r.theta, r.phi1, r.phi2, r.theta_dot, -r.phi1_dot, -r.phi2_dot))
    refl = reflect(incoming, cap)
    m = MagneticParams(0.2)
    a_, b_ = to_reduced(incoming), to_reduced(refl)
    ca, cb = conserved_set(a_, m), conserved_set(b_, m)
    assert abs(ca.c1 - cb.c1) < 1e-9 and abs(ca.c2 - cb.c2) < 1e-9
    assert abs(incoming.speed - refl.speed) < 1e-12
    assert abs(incoming.delta - refl.delta) < 1e-12
    assert abs(theta_dot(incoming) + theta_dot(refl)) < 1e-12
    assert which_cap_contact(refl, w).which == which


def test_orbit_far_from_caps_is_type_one():
    # Reeb-like launch at theta = pi/4: the projected circle is tiny and stays on the equator
    r = ReducedState(np.pi / 4, 0.0, 0.0, 0.01, 1.0, 1.0)
    t = from_reduced(r)
    m = MagneticParams(0.2)
    orb = trace_billiard(t, m, 0.2, 20.0)
    assert orb.type == 1 and not orb.events
    plain = solve_closed_form(t, m)
    assert np.allclose(orb.positions(np.linspace(0, 20, 50)), plain.position(np.linspace(0, 20, 50)))


def test_head_on_meridian_retraces():
    w = 0.2
    t = from_reduced(ReducedState(np.pi / 4, 0.3, 0.9, 1.0, 0.0, 0.0))
    orb = trace_billiard(t, MagneticParams(0.0), w, 1.0 * (np.pi / 4 - w) * 2, stop_after=1)
    assert orb.type == 2
    ev = orb.events[0]
    assert np.allclose(ev.state_out.vec, -ev.state_in.vec, atol=1e-12)
    back = trace_billiard(t, MagneticParams(0.0), w, 2 * (np.pi / 4 - w) + 1e-9)
    assert closure_defect(back.final_state, reverse_state(t)) < 1e-8


def test_meridian_across_both_caps_is_type_three():
    t = from_reduced(ReducedState(np.pi / 4, 0.0, 0.0, 1.0, 0.0, 0.0))
    orb = trace_billiard(t, MagneticParams(0.3), 0.3, 10.0)
    assert orb.type == 3


@settings(max_examples=25)
@given(seeds, st.floats(0.05, 0.3))
def test_bounces_conserve_and_reverse(seed, eps):
    rng = np.random.default_rng(seed)
    m = MagneticParams(eps)
    t = _inside(rng, eps)
    orb = trace_billiard(t, m, eps, 25.0)
    for e in orb.events:
        a, b = to_reduced(e.state_in), to_reduced(e.state_out)
        ca, cb = conserved_set(a, m), conserved_set(b, m)
        assert abs(ca.c1 - cb.c1) < 1e-9 and abs(ca.c2 - cb.c2) < 1e-9
        assert abs(e.state_in.speed - e.state_out.speed) < 1e-9
        assert abs(a.theta_dot + b.theta_dot) < 1e-9
        assert which_cap_contact(e.state_in, eps) is not None
    # arcs join continuously
    for prev, nxt in zip(orb.arcs[:-1], orb.arcs[1:]):
        end = evaluate(prev.orbit, prev.duration)
        start = evaluate(nxt.orbit, 0.0)
        assert np.allclose(end.base.coords, start.base.coords, atol=1e-9)
    back = trace_billiard(reverse_state(orb.final_state), MagneticParams(-eps), eps, 25.0)
    assert closure_defect(back.final_state, reverse_state(t)) < 1e-7


def test_cap_entry_angle_examples():
    assert cap_entry_angle(0.3, 0.3, 1e-9) == pytest.approx(0.0, abs=1e-6)
    assert cap_entry_angle(0.3, 0.3, 0.3) == pytest.approx(np.pi / 3)
    with pytest.raises(NoIntersection):
        cap_entry_angle(0.1, 0.5, 0.1)


def test_periodic_bounce_orbit_and_mirror():
    rng = np.random.default_rng(1)
    m = MagneticParams(0.2)
    found = 0
    for _ in range(30):
        orb = find_periodic_bounce(_inside(rng, 0.2), m, 0.2)
        if orb is None or orb.type == 1:
            continue
        found += 1
        assert orb.defect < 1e-9
        mc = mirror_extension(orb)
        assert mc.relative_gap < 1e-6 and mc.unfold_error < 1e-8
        if found >= 3:
            break
    assert found >= 3
