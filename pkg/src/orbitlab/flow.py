"""Exact magnetic geodesics of (S^3, round metric, eps * d alpha).

A magnetic geodesic solves

    gamma'' - i eps gamma' + (c^2 - eps delta) gamma = 0

in C^2, with speed ``c`` and Reeb component ``delta = Re<i gamma, gamma'>``
conserved.  Its solution is a superposition of two complex rotations,
``gamma(s) = exp(i theta_+ s) p_+ + exp(i theta_- s) p_-``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateInput, InvalidParameter
from .geometry import (
    TAU_UNIT,
    MagneticParams,
    SpherePoint,
    TangentVector,
    construct_J,
    rotation_speed,
    to_complex,
    to_real,
)

TAU_ODE = 1e-10
TAU_EQUIV = 1e-9
Q_MAX = 10**6
ZERO_AMPLITUDE = 1e-10


@dataclass(frozen=True, eq=False)
class ClosedFormOrbit:
    theta_plus: float
    theta_minus: float
    p_plus: np.ndarray
    p_minus: np.ndarray
    c: float
    delta: float
    a: float
    epsilon: float

    def position(self, s):
        """gamma(s) as complex 2-vectors; s may be scalar or 1-D array."""
        s = np.asarray(s, dtype=float)
        return (np.exp(1j * self.theta_plus * s)[..., None] * self.p_plus
                + np.exp(1j * self.theta_minus * s)[..., None] * self.p_minus)

    def velocity(self, s):
        s = np.asarray(s, dtype=float)
        return (1j * self.theta_plus * np.exp(1j * self.theta_plus * s)[..., None] * self.p_plus
                + 1j * self.theta_minus * np.exp(1j * self.theta_minus * s)[..., None] * self.p_minus)

    def acceleration(self, s):
        s = np.asarray(s, dtype=float)
        return (-self.theta_plus ** 2 * np.exp(1j * self.theta_plus * s)[..., None] * self.p_plus
                - self.theta_minus ** 2 * np.exp(1j * self.theta_minus * s)[..., None] * self.p_minus)

    def ode_residual(self, s) -> np.ndarray:
        """|gamma'' - i eps gamma' + (c^2 - eps delta) gamma| at the given times."""
        eps = self.epsilon
        r = (self.acceleration(s) - 1j * eps * self.velocity(s)
             + (self.c ** 2 - eps * self.delta) * self.position(s))
        return np.linalg.norm(r, axis=-1)

    @property
    def rotation_frequency(self) -> float:
        """Angular speed 2a of the projected circle on S^2(1/2)."""
        return self.theta_plus - self.theta_minus


def solve_closed_form(t: TangentVector, m: MagneticParams) -> ClosedFormOrbit:
    eps = m.epsilon
    c, delta = t.speed, t.delta
    a = rotation_speed(c, delta, eps)
    if a <= TAU_UNIT:
        raise DegenerateInput("theta_+ == theta_-: velocity equals (eps/2) i x")
    th_p = eps / 2.0 + a
    th_m = eps / 2.0 - a
    x, v = t.x, t.v
    p_plus = -(th_m * x + 1j * v) / (th_p - th_m)
    p_minus = (th_p * x + 1j * v) / (th_p - th_m)
    return ClosedFormOrbit(th_p, th_m, p_plus, p_minus, c, delta, a, eps)


def orbit_from_frequencies(theta_plus, theta_minus, p_plus, p_minus) -> ClosedFormOrbit:
    """Build an orbit directly from its two frequencies and amplitudes.

    The amplitudes must be Hermitian-orthogonal with |p_+|^2 + |p_-|^2 = 1.
    Used for synthetic orbits whose strength lies outside the physical range.
    """
    p_plus = np.asarray(p_plus, dtype=complex)
    p_minus = np.asarray(p_minus, dtype=complex)
    if abs(np.vdot(p_plus, p_minus)) > 1e-12:
        raise InvalidParameter("amplitudes must be orthogonal")
    if abs(np.vdot(p_plus, p_plus).real + np.vdot(p_minus, p_minus).real - 1) > 1e-12:
        raise InvalidParameter("amplitudes must have unit total norm")
    eps = theta_plus + theta_minus
    c = float(np.sqrt(theta_plus ** 2 * np.vdot(p_plus, p_plus).real
                      + theta_minus ** 2 * np.vdot(p_minus, p_minus).real))
    x = p_plus + p_minus
    v = 1j * (theta_plus * p_plus + theta_minus * p_minus)
    delta = float(np.real(np.vdot(1j * x, v)))
    return ClosedFormOrbit(float(theta_plus), float(theta_minus), p_plus, p_minus,
                           c, delta, (theta_plus - theta_minus) / 2.0, eps)


def evaluate(orbit: ClosedFormOrbit, s: float) -> TangentVector:
    x = orbit.position(s)
    v = orbit.velocity(s)
    return TangentVector(SpherePoint(to_real(x)), to_real(v))


def evaluate_quaternionic(t: TangentVector, m: MagneticParams, s) -> np.ndarray:
    """exp(i eps s/2) exp(J a s) x, returned as real 4-vectors (shape (..., 4))."""
    eps = m.epsilon
    a = rotation_speed(t.speed, t.delta, eps)
    if a <= TAU_UNIT:
        raise DegenerateInput("a = 0")
    J = construct_J(t, m).matrix
    s = np.asarray(s, dtype=float)
    x = t.base.coords
    Jx = J @ x
    # exp(J a s) = cos(as) I + sin(as) J since J^2 = -I
    rotated = np.cos(a * s)[..., None] * x + np.sin(a * s)[..., None] * Jx
    z = to_complex(rotated) * np.exp(0.5j * eps * s)[..., None]
    return to_real(z)


def _rational(r: float, q_max: int = Q_MAX):
    frac = Fraction(r).limit_denominator(q_max)
    q = frac.denominator
    tol = max(1e-9 / q ** 2, 8 * np.finfo(float).eps * max(abs(r), 1.0))
    if abs(r - frac.numerator / q) < tol:
        return frac
    return None


def minimal_period(orbit: ClosedFormOrbit, q_max: int = Q_MAX):
    """Smallest T > 0 with gamma(T) = gamma(0), or None if non-periodic."""
    n_plus = np.linalg.norm(orbit.p_plus)
    n_minus = np.linalg.norm(orbit.p_minus)
    th_p, th_m = orbit.theta_plus, orbit.theta_minus
    if n_minus < ZERO_AMPLITUDE or n_plus < ZERO_AMPLITUDE:
        th = th_p if n_minus < ZERO_AMPLITUDE else th_m
        if abs(th) < TAU_UNIT:
            return None
        return 2 * np.pi / abs(th)
    if abs(th_m) < TAU_UNIT:
        return 2 * np.pi / abs(th_p)
    if abs(th_p) < TAU_UNIT:
        return 2 * np.pi / abs(th_m)
    frac = _rational(th_p / th_m, q_max)
    if frac is None:
        return None
    return 2 * np.pi * frac.denominator / abs(th_m)


@dataclass(frozen=True)
class PeriodBound:
    bound: float
    branch: str  # "fast" (c >= eps) or "slow" (c <= eps)


def period_lower_bound(c: float, m: MagneticParams) -> PeriodBound:
    if c <= 0:
        raise InvalidParameter("speed must be positive")
    eps = abs(m.epsilon)
    if c >= eps:
        return PeriodBound(2 * np.pi / c, "fast")
    return PeriodBound(2 * np.pi / eps, "slow")


def hopf_radius(c: float, delta: float, m: MagneticParams) -> float:
    """Euclidean radius of the Hopf projection of a magnetic geodesic."""
    eps = m.epsilon
    if abs(delta) > c * (1 + 1e-12):
        raise InvalidParameter(f"|delta| = {abs(delta)!r} exceeds speed {c!r}")
    den = eps * eps + 4.0 * (c * c - eps * delta)
    if den <= 0:
        raise DegenerateInput("denominator vanishes")
    num = max((c - delta) * (c + delta), 0.0)
    return float(np.sqrt(num / den))
