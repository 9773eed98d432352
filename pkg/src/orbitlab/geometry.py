"""Geometry of the round unit sphere S^3 in C^2 = R^4.

Points are stored as four real coordinates ``(x0, x1, x2, x3)`` with
``z1 = x0 + i x1`` and ``z2 = x2 + i x3``.  The two complex structures used
throughout are ``i`` (scalar multiplication on C^2) and ``j = diag(i, -i)``,
which commute.  The lens space L(p;1) is the quotient by ``x -> exp(2 pi j/p) x``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InvalidParameter

TAU_UNIT = 1e-12
TAU_ALG = 1e-10
RENORM_TOL = 1e-6

# real 4x4 matrices of the complex structures i and j
I_MAT = np.array(
    [[0.0, -1.0, 0.0, 0.0],
     [1.0, 0.0, 0.0, 0.0],
     [0.0, 0.0, 0.0, -1.0],
     [0.0, 0.0, 1.0, 0.0]]
)
J_MAT = np.array(
    [[0.0, -1.0, 0.0, 0.0],
     [1.0, 0.0, 0.0, 0.0],
     [0.0, 0.0, 0.0, 1.0],
     [0.0, 0.0, -1.0, 0.0]]
)


def to_complex(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return r[..., 0::2] + 1j * r[..., 1::2]


def to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (4,))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def real_dot(a, b) -> float:
    """Re<a, b> for complex 2-vectors (the Euclidean product on R^4)."""
    return float(np.real(np.vdot(a, b)))


@dataclass(frozen=True, eq=False)
class SpherePoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(4)
        n = np.linalg.norm(c)
        if not np.isfinite(n) or abs(n - 1.0) >= RENORM_TOL:
            raise InvalidParameter(f"point is not on S^3 (|x| = {n!r})")
        object.__setattr__(self, "coords", c / n)

    @classmethod
    def from_complex(cls, z1, z2) -> "SpherePoint":
        return cls(to_real(np.array([z1, z2], dtype=complex)))

    @property
    def z(self) -> np.ndarray:
        return to_complex(self.coords)

    def __repr__(self):
        return f"SpherePoint({np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: SpherePoint
    vec: np.ndarray

    def __post_init__(self):
        v = np.array(self.vec, dtype=float).reshape(4)
        x = self.base.coords
        normal = float(x @ v)
        if abs(normal) > RENORM_TOL * (1.0 + np.linalg.norm(v)):
            raise InvalidParameter(f"vector is not tangent to S^3 (Re<x,v> = {normal!r})")
        object.__setattr__(self, "vec", v - normal * x)

    @classmethod
    def from_complex(cls, z, w) -> "TangentVector":
        z = np.asarray(z, dtype=complex)
        return cls(SpherePoint(to_real(z)), to_real(w))

    @property
    def x(self) -> np.ndarray:
        return self.base.z

    @property
    def v(self) -> np.ndarray:
        return to_complex(self.vec)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.vec))

    @property
    def delta(self) -> float:
        """Reeb component Re<ix, v>, an integral of the magnetic flow."""
        return float(self.base.coords @ I_MAT.T @ self.vec)

    def __repr__(self):
        return (f"TangentVector(base={np.array2string(self.base.coords, precision=6)}, "
                f"vec={np.array2string(self.vec, precision=6)})")


@dataclass(frozen=True)
class HopfCoords:
    theta: float
    phi1: float
    phi2: float


@dataclass(frozen=True)
class MagneticParams:
    """Strength of the magnetic form epsilon * d(alpha).

    Negative values are accepted so that time-reversed flows can be expressed.
    """

    epsilon: float

    def __post_init__(self):
        e = float(self.epsilon)
        if not np.isfinite(e) or abs(e) >= 0.5:
            raise InvalidParameter(f"|epsilon| must be < 1/2, got {e!r}")
        object.__setattr__(self, "epsilon", e)


@dataclass(frozen=True, eq=False)
class ComplexStructureJ:
    matrix: np.ndarray

    def apply(self, r) -> np.ndarray:
        return self.matrix @ np.asarray(r, dtype=float)

    def defects(self) -> dict:
        J = self.matrix
        eye = np.eye(4)
        return {
            "square": float(np.abs(J @ J + eye).max()),
            "orthogonal": float(np.abs(J.T @ J - eye).max()),
            "commutator": float(np.abs(J @ I_MAT - I_MAT @ J).max()),
        }


def contact_form(t: TangentVector) -> float:
    """alpha_x(v) = 1/2 Re<ix, v>."""
    return 0.5 * t.delta


def _zp_matrix(p: int, k: int) -> np.ndarray:
    ang = 2.0 * np.pi * k / p
    # exp(ang * j) = cos(ang) I + sin(ang) j
    return np.cos(ang) * np.eye(4) + np.sin(ang) * J_MAT


def check_odd(p) -> int:
    if int(p) != p or p < 1 or p % 2 == 0:
        raise InvalidParameter(f"p must be an odd integer >= 1, got {p!r}")
    return int(p)


def zp_action(x: SpherePoint, p: int, k: int) -> SpherePoint:
    """Apply the k-th power of the generator exp(2 pi j / p)."""
    p = check_odd(p)
    return SpherePoint(_zp_matrix(p, k) @ x.coords)


def zp_action_tangent(t: TangentVector, p: int, k: int) -> TangentVector:
    p = check_odd(p)
    M = _zp_matrix(p, k)
    return TangentVector(SpherePoint(M @ t.base.coords), M @ t.vec)


def hopf_project(x) -> np.ndarray:
    """Hopf map for i, onto the sphere of radius 1/2 in R^3.

    Accepts a SpherePoint or an array of complex 2-vectors of shape (..., 2).
    """
    z = x.z if isinstance(x, SpherePoint) else np.asarray(x, dtype=complex)
    w = np.conj(z[..., 0]) * z[..., 1]
    h = 0.5 * (np.abs(z[..., 0]) ** 2 - np.abs(z[..., 1]) ** 2)
    return np.stack([w.real, w.imag, h], axis=-1)


def to_hopf(x: SpherePoint) -> HopfCoords:
    z1, z2 = x.z
    theta = float(np.arccos(np.clip(abs(z2), 0.0, 1.0)))
    phi1 = float(np.mod(np.arctan2(z1.imag, z1.real), 2 * np.pi))
    phi2 = float(np.mod(np.arctan2(z2.imag, z2.real), 2 * np.pi))
    return HopfCoords(theta, phi1, phi2)


def from_hopf(h: HopfCoords) -> SpherePoint:
    return SpherePoint.from_complex(np.exp(1j * h.phi1) * np.sin(h.theta),
                                    np.exp(1j * h.phi2) * np.cos(h.theta))


def rotation_speed(c: float, delta: float, eps: float) -> float:
    """a = 1/2 sqrt(eps^2 + 4 (c^2 - eps delta))."""
    disc = eps * eps + 4.0 * (c * c - eps * delta)
    return 0.5 * float(np.sqrt(max(disc, 0.0)))


def _complement_basis(e0: np.ndarray, e1: np.ndarray):
    basis = [e0, e1]
    out = []
    for _ in range(2):
        best, best_n = None, -1.0
        for seed in np.eye(4):
            r = seed - sum((b @ seed) * b for b in basis)
            n = np.linalg.norm(r)
            if n > best_n + 1e-12:
                best, best_n = r, n
        f = best / best_n
        basis.append(f)
        out.append(f)
    return out


def _assemble_J(e0, e1, f1, f2, sigma: int) -> np.ndarray:
    s = sigma * np.sign(np.linalg.det(np.column_stack([e0, e1, f1, f2])))
    B_in = np.column_stack([e0, e1, f1, f2])
    B_out = np.column_stack([e1, -e0, s * f2, -s * f1])
    return B_out @ B_in.T


def _pin_orientation() -> int:
    # generic reference configuration; exactly one sign commutes with i
    e0 = np.array([0.5, 0.5, 0.5, 0.5])
    w = np.array([0.7, -0.1, -0.1, -0.5])
    w -= (w @ e0) * e0
    e1 = w / np.linalg.norm(w)
    f1, f2 = _complement_basis(e0, e1)
    hits = [s for s in (1, -1)
            if np.abs(_assemble_J(e0, e1, f1, f2, s) @ I_MAT
                      - I_MAT @ _assemble_J(e0, e1, f1, f2, s)).max() < TAU_ALG]
    if len(hits) != 1:
        raise RuntimeError("orientation self-test failed")
    return hits[0]


ORIENTATION_SIGN = _pin_orientation()


def construct_J(t: TangentVector, m: MagneticParams) -> ComplexStructureJ:
    """Orthogonal complex structure J with J x = (v - (eps/2) i x) / a commuting with i."""
    eps = m.epsilon
    x = t.base.coords
    a = rotation_speed(t.speed, t.delta, eps)
    if a <= TAU_UNIT:
        raise DegenerateInput("a = 0: velocity equals (eps/2) i x")
    w = (t.vec - 0.5 * eps * (I_MAT @ x)) / a
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise DegenerateInput(f"|v - (eps/2) i x| != a (got {np.linalg.norm(w)!r})")
    w = w / np.linalg.norm(w)
    f1, f2 = _complement_basis(x, w)
    return ComplexStructureJ(_assemble_J(x, w, f1, f2, ORIENTATION_SIGN))


def random_point(rng: np.random.Generator) -> SpherePoint:
    g = rng.standard_normal(4)
    return SpherePoint(g / np.linalg.norm(g))


def random_tangent(rng: np.random.Generator, speed=None, x: SpherePoint | None = None) -> TangentVector:
    """Random tangent vector; speed defaults to uniform on (0, 1]."""
    if x is None:
        x = random_point(rng)
    g = rng.standard_normal(4)
    g -= (g @ x.coords) * x.coords
    if speed is None:
        speed = 1.0 - rng.random()
    return TangentVector(x, speed * g / np.linalg.norm(g))
