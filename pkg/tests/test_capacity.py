import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orbitlab.capacity import (
    ReparamProfile,
    build_admissible,
    certify_lower_bound,
    clocked_period,
    h_eps,
    h_eps_prime,
    link_clearance,
    reparam_period,
)
from orbitlab.errors import InvalidParameter
from orbitlab.geometry import MagneticParams
from orbitlab.lens import LensSpace, lens_short_orbit_scan

TWO_PI = 2 * np.pi


@given(st.floats(1e-3, 0.49))
def test_h_junction(eps):
    y = eps / 2
    lin = TWO_PI * (y / math.sqrt(eps) + math.sqrt(eps) / 2)
    sq = TWO_PI * math.sqrt(2 * y)
    assert abs(lin - sq) < 1e-12
    assert abs(h_eps(y, eps) - TWO_PI * math.sqrt(eps)) < 1e-12
    assert abs(h_eps_prime(np.nextafter(y, 0), eps) - h_eps_prime(np.nextafter(y, 1), eps)) < 1e-6


def test_h_examples():
    assert h_eps(0.5, 0.1) == pytest.approx(TWO_PI)
    assert h_eps(0.0, 0.1) == pytest.approx(math.pi * math.sqrt(0.1))
    assert h_eps(0.5, 0.0) == pytest.approx(TWO_PI)


@given(st.floats(1e-3, 0.49))
def test_h_monotone(eps):
    ys = np.linspace(0, 1, 2001)
    assert np.all(np.diff(h_eps(ys, eps)) > 0)


def test_h_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        h_eps(0.1, 0.5)
    with pytest.raises(InvalidParameter):
        h_eps(-1.0, 0.1)


def test_reparam_examples():
    eps = 0.1
    assert reparam_period(TWO_PI / math.sqrt(eps), 0.01, eps) == pytest.approx(1.0)
    c = 0.7
    assert reparam_period(TWO_PI / c, c * c / 2, eps) == pytest.approx(1.0)


def test_smoothed_profile_close_to_piecewise():
    prof = ReparamProfile(0.1, smooth_width=0.01)
    ys = np.linspace(0, 0.5, 501)
    far = np.abs(ys - 0.05) > 0.011
    assert np.allclose(prof.h(ys)[far], h_eps(ys[far], 0.1), atol=1e-12)
    assert np.all(np.diff(prof.h(ys)) > 0)


def test_admissible_profile():
    f = build_admissible(0.05, 0.01)
    u = np.linspace(f.a, f.b, 4001)
    vals = f.f(u)
    assert vals[0] == 0.0 and vals[-1] == pytest.approx(f.oscillation, rel=1e-10)
    assert np.max(vals) == pytest.approx(f.oscillation, rel=1e-10)
    slope = np.diff(vals) / np.diff(u)
    assert slope.min() >= -1e-12 and slope.max() <= f.s_max + 1e-9
    assert np.all(f.df(u) <= f.s_max) and np.all(f.df(u) >= 0)
    # flat plateaus at both ends
    assert f.df(f.a + 0.5 * f.margin) == 0 and f.df(f.b - 0.5 * f.margin) == 0
    # oscillation is b - a up to O(margin)
    assert abs(f.oscillation - (f.b - f.a)) < 5 * f.margin * (f.b - f.a)


def test_admissible_rejects_degenerate_margin():
    with pytest.raises(InvalidParameter):
        build_admissible(0.05, 0.0)
    with pytest.raises(InvalidParameter):
        build_admissible(0.05, 0.01, a=1.0, b=1.03)


def test_clearance_filter():
    recs = lens_short_orbit_scan(LensSpace(3), MagneticParams(0.1), n_seeds=0)
    reeb = [r for r in recs if r.extra["reeb_axis"]]
    assert reeb and all(link_clearance(r) < 1e-6 for r in reeb)


def test_clocked_period_flat_region_is_infinite():
    recs = lens_short_orbit_scan(LensSpace(3), MagneticParams(0.1), n_seeds=0, speeds=(0.95,))
    prof, f = ReparamProfile(0.1), build_admissible(0.1)
    assert all(clocked_period(r, prof, f) == math.inf for r in recs)  # outside D_{1-2 eps}


def test_epsilon_zero_control_fails_with_short_geodesic():
    est = certify_lower_bound(LensSpace(3), 0.0, search_budget=50)
    assert not est.passed
    w = est.witness
    assert w["period"] * w["c"] == pytest.approx(TWO_PI / 3, rel=1e-9)
    assert est.verdict().startswith("FAIL")


def test_certify_reports_structure():
    est = certify_lower_bound(LensSpace(1), 0.2, search_budget=200, bounce_fraction=0.05)
    d = est.to_dict()
    assert d["oscillation"] == pytest.approx(build_admissible(0.2).oscillation)
    assert d["reference_upper"] == pytest.approx(TWO_PI)
    assert "pass" in d and d["n_orbits"] > 0
    assert ("PASS" if est.passed else "FAIL") in est.verdict()
