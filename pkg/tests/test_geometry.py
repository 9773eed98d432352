import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import eps_small, seeds
from orbitlab.errors import DegenerateInput, InvalidParameter
from orbitlab.geometry import (
    I_MAT,
    J_MAT,
    HopfCoords,
    MagneticParams,
    SpherePoint,
    TangentVector,
    construct_J,
    contact_form,
    from_hopf,
    hopf_project,
    random_point,
    random_tangent,
    to_complex,
    to_hopf,
    to_real,
    zp_action,
    zp_action_tangent,
)

E1 = SpherePoint(np.array([1.0, 0, 0, 0]))


def test_i_and_j_commute_and_square_to_minus_one():
    for M in (I_MAT, J_MAT):
        assert np.allclose(M @ M, -np.eye(4))
    assert np.allclose(I_MAT @ J_MAT, J_MAT @ I_MAT)


def test_complex_roundtrip(rng):
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    assert np.allclose(to_complex(to_real(z)), z)


def test_sphere_point_renormalises_small_drift_only():
    p = SpherePoint(np.array([1.0 + 1e-8, 0, 0, 0]))
    assert abs(np.linalg.norm(p.coords) - 1) < 1e-15
    with pytest.raises(InvalidParameter):
        SpherePoint(np.array([1.1, 0, 0, 0]))


def test_tangent_vector_rejects_normal_component():
    with pytest.raises(InvalidParameter):
        TangentVector(E1, np.array([0.5, 0.1, 0, 0]))


def test_magnetic_params_bound():
    MagneticParams(0.49)
    for bad in (0.5, 0.7, np.nan):
        with pytest.raises(InvalidParameter):
            MagneticParams(bad)


def test_contact_form_examples():
    x = E1.coords
    assert contact_form(TangentVector(E1, I_MAT @ x)) == pytest.approx(0.5, abs=1e-15)
    assert contact_form(TangentVector(E1, np.array([0, 0, 1.0, 0]))) == 0.0
    # j(1,0) = (i,0)
    assert contact_form(TangentVector(E1, J_MAT @ x)) == pytest.approx(0.5, abs=1e-15)


def test_zp_action_examples():
    assert np.allclose(zp_action(E1, 3, 3).coords, E1.coords, atol=1e-15)
    z = zp_action(E1, 3, 1).z
    assert np.allclose(z, [np.exp(2j * np.pi / 3), 0])
    for bad in (2, 0, -3, 4):
        with pytest.raises(InvalidParameter):
            zp_action(E1, bad, 1)


def test_hopf_poles():
    assert np.allclose(hopf_project(E1), [0, 0, 0.5])
    assert np.allclose(hopf_project(SpherePoint(np.array([0, 0, 1.0, 0]))), [0, 0, -0.5])


@given(seeds)
def test_hopf_image_on_half_sphere(seed):
    x = random_point(np.random.default_rng(seed))
    assert abs(np.linalg.norm(hopf_project(x)) - 0.5) < 1e-10


@given(seeds, st.sampled_from([3, 5, 7]), st.integers(0, 6))
def test_contact_form_zp_invariant(seed, p, k):
    t = random_tangent(np.random.default_rng(seed))
    assert abs(contact_form(zp_action_tangent(t, p, k)) - contact_form(t)) < 1e-12


@given(seeds, st.sampled_from([3, 5, 7]), st.integers(0, 6))
def test_zp_action_rotates_hopf_image(seed, p, k):
    x = random_point(np.random.default_rng(seed))
    h, g = hopf_project(x), hopf_project(zp_action(x, p, k))
    a = 4 * np.pi * k / p
    # conj(z1) z2 picks up exp(-4 pi i k / p)
    rot = np.array([[np.cos(a), np.sin(a), 0], [-np.sin(a), np.cos(a), 0], [0, 0, 1]])
    assert np.allclose(g, rot @ h, atol=1e-10)


@given(seeds, eps_small)
def test_construct_J_structure(seed, eps):
    t = random_tangent(np.random.default_rng(seed))
    m = MagneticParams(eps)
    try:
        J = construct_J(t, m)
    except DegenerateInput:
        return
    d = J.defects()
    assert max(d.values()) < 1e-10
    M = J.matrix
    assert np.allclose(M @ M, -np.eye(4), atol=1e-10)
    assert np.allclose(M.T @ M, np.eye(4), atol=1e-10)
    assert np.allclose(M @ I_MAT, I_MAT @ M, atol=1e-10)


def test_construct_J_degenerate():
    x = E1.coords
    t = TangentVector(E1, 0.05 * (I_MAT @ x))
    with pytest.raises(DegenerateInput):
        construct_J(t, MagneticParams(0.1))


@given(st.floats(0.05, np.pi / 2 - 0.05), st.floats(0, 2 * np.pi - 1e-9), st.floats(0, 2 * np.pi - 1e-9))
def test_hopf_coordinate_roundtrip(theta, p1, p2):
    h = to_hopf(from_hopf(HopfCoords(theta, p1, p2)))
    assert abs(h.theta - theta) < 1e-10
    assert abs(np.angle(np.exp(1j * (h.phi1 - p1)))) < 1e-10
    assert abs(np.angle(np.exp(1j * (h.phi2 - p2)))) < 1e-10


@given(seeds)
def test_random_tangent_is_tangent(seed):
    t = random_tangent(np.random.default_rng(seed), speed=0.7)
    assert abs(t.base.coords @ t.vec) < 1e-12
    assert abs(t.speed - 0.7) < 1e-12
    assert abs(t.delta) <= t.speed + 1e-12
