import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import seeds
from orbitlab.errors import InvalidParameter
from orbitlab.flow import solve_closed_form
from orbitlab.geometry import J_MAT, MagneticParams, TangentVector, random_point, random_tangent
from orbitlab.lens import (
    LensSpace,
    geodesic_closing_time,
    identity_residual,
    is_zp_invariant,
    lens_short_orbit_scan,
    reeb_seed,
    revalidate,
    zp_symmetric_bounce_scan,
)


def test_lens_space_rejects_even_p():
    with pytest.raises(InvalidParameter):
        LensSpace(4)


@given(seeds, st.sampled_from([1, 3, 5, 7]))
def test_closing_times(seed, p):
    rng = np.random.default_rng(seed)
    L = LensSpace(p)
    x = random_point(rng)
    jt = TangentVector(x, J_MAT @ x.coords)
    assert geodesic_closing_time(jt, L) == pytest.approx(2 * np.pi / p, abs=1e-12)
    assert geodesic_closing_time(random_tangent(rng, speed=1.0), L) == pytest.approx(2 * np.pi)


def test_closing_time_needs_unit_speed():
    with pytest.raises(InvalidParameter):
        geodesic_closing_time(random_tangent(np.random.default_rng(0), speed=0.5), LensSpace(3))


@given(st.sampled_from([1, 3, 5, 7]), st.floats(0.0, 0.3))
def test_reeb_circles_are_invariant(p, eps):
    orb = solve_closed_form(reeb_seed("-", 1.0), MagneticParams(eps))
    assert is_zp_invariant(orb, LensSpace(p), 2 * np.pi)


def test_generic_orbit_not_invariant():
    x = random_point(np.random.default_rng(2))
    orb = solve_closed_form(TangentVector(x, _perp(x)), MagneticParams(0.0))
    assert not is_zp_invariant(orb, LensSpace(3), 2 * np.pi)


def _perp(x):
    g = np.array([0.3, -0.2, 0.5, 0.1])
    g -= (g @ x.coords) * x.coords
    jx = J_MAT @ x.coords
    g -= (g @ jx) * jx
    return g / np.linalg.norm(g)


def test_canonical_representative_is_in_orbit():
    L = LensSpace(5)
    x = random_point(np.random.default_rng(4))
    rep, k = L.canonical(x)
    assert np.allclose(L.deck(k) @ x.coords, rep.coords)
    for j in range(5):
        y = L.canonical(type(x)(L.deck(j) @ x.coords))[0]
        assert np.allclose(y.coords, rep.coords, atol=1e-10)


@pytest.mark.parametrize("p,eps", [(3, 0.2), (5, 0.1)])
def test_short_orbit_dichotomy(p, eps):
    recs = lens_short_orbit_scan(LensSpace(p), MagneticParams(eps), n_seeds=300)
    below = [r for r in recs if r.below_bound]
    assert below and all(r.extra["reeb_axis"] for r in below)
    for r in recs:
        if r.zp_invariant and not r.extra["reeb_axis"]:
            # the identity exp(i eps T) z1 z2 = z1 z2 forces eps T in 2 pi Z
            assert r.extra["identity_residual"] < 1e-9
            assert r.period * eps / (2 * np.pi) >= 1 - 1e-9
    assert all(revalidate(r) for r in recs[:50])


def test_identity_residual_vanishes_on_the_link():
    x = reeb_seed("+", 1.0).base
    assert identity_residual(x, 0.2, 1.234) == 0.0


def test_geodesic_control_finds_short_orbit():
    recs = lens_short_orbit_scan(LensSpace(3), MagneticParams(0.0), n_seeds=50)
    shortest = min(r.period * r.c for r in recs)
    assert shortest == pytest.approx(2 * np.pi / 3, rel=1e-9)


@settings(max_examples=3)
@given(st.sampled_from([1, 3]))
def test_bounce_scan_records_close(p):
    recs = zp_symmetric_bounce_scan(LensSpace(p), MagneticParams(0.2), 0.2, n_seeds=8, include_plain=True)
    for r in recs:
        assert r.defect < 1e-8
        assert r.kind in ("bounce", "trapped")
