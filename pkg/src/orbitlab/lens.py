"""Dynamics on the lens space L(p;1) through S^3 lifts.

An orbit closes on L(p;1) with lens period T and deck power k when
``gamma(s + T) = g^k gamma(s)`` for all s, with ``g = exp(2 pi j / p)``.
For a closed-form orbit ``exp(i th+ s) p+ + exp(i th- s) p-`` and k != 0 this
forces both amplitudes to be eigenvectors of j, so the only candidates are the
Reeb circles and Clifford-torus orbits (e^{i th+ s} z1, e^{i th- s} z2).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from .billiards import BounceOrbit, find_periodic_bounce, trace_billiard, wall_state, CapGeometry
from .errors import DegenerateInput, InvalidParameter
from .flow import ClosedFormOrbit, evaluate, minimal_period, period_lower_bound, solve_closed_form
from .geometry import (
    I_MAT,
    J_MAT,
    TAU_ALG,
    MagneticParams,
    SpherePoint,
    TangentVector,
    _zp_matrix,
    check_odd,
    random_tangent,
    to_complex,
    to_real,
)
from .reduced import link_distance

ALIGN_TOL = 1e-9
TAU_CLOSE = 1e-9
GRID = 128


@dataclass(frozen=True)
class LensSpace:
    p: int

    def __post_init__(self):
        object.__setattr__(self, "p", check_odd(self.p))

    def deck(self, k: int) -> np.ndarray:
        return _zp_matrix(self.p, k)

    def canonical(self, x: SpherePoint) -> tuple:
        """Representative of the orbit of x minimising phi1 + phi2 mod 2 pi, and its power."""
        best = None
        for k in range(self.p):
            y = self.deck(k) @ x.coords
            z = to_complex(y)
            score = float(np.mod(np.angle(z[0]) + np.angle(z[1]), 2 * np.pi))
            # phi1 + phi2 is deck-invariant; break ties on phi1
            key = (round(score, 12), float(np.mod(np.angle(z[0]), 2 * np.pi)))
            if best is None or key < best[0]:
                best = (key, k, y)
        return SpherePoint(best[2]), best[1]


@dataclass
class CensusRecord:
    epsilon: float
    p: int
    c: float
    delta: float
    seed: int
    kind: str  # geodesic | magnetic | bounce | trapped
    period: float
    zp_invariant: bool
    defect: float
    k: int = 0
    bound: float = float("nan")
    x: list = field(default_factory=list)
    v: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def below_bound(self) -> bool:
        return self.period < self.bound * (1 - 1e-8)

    def to_dict(self) -> dict:
        return asdict(self)

    def tangent(self) -> TangentVector:
        return TangentVector(SpherePoint(np.array(self.x)), np.array(self.v))


def geodesic_closing_time(t: TangentVector, L: LensSpace) -> float:
    """Smallest s > 0 with cos(s) x + sin(s) v in the deck orbit of x.

    The geodesic lies in span{x, v} and g^k x in span{x, jx}; both meet only
    when v = +-jx, so the closing time is 2 pi / p or 2 pi.
    """
    if abs(t.speed - 1.0) > 1e-9:
        raise InvalidParameter(f"unit speed required, got |v| = {t.speed!r}")
    if L.p == 1:
        return 2 * np.pi
    x, v = t.base.coords, t.vec
    jx = J_MAT @ x
    for sgn in (1.0, -1.0):
        # jx is a unit tangent vector; compare directions
        if np.linalg.norm(v - sgn * jx) < ALIGN_TOL:
            return 2 * np.pi / L.p
    return 2 * np.pi


def _positions(orbit, s) -> np.ndarray:
    if isinstance(orbit, ClosedFormOrbit):
        return orbit.position(s)
    if isinstance(orbit, BounceOrbit):
        return orbit.positions(s)
    raise TypeError(f"unsupported orbit type {type(orbit).__name__}")


def is_zp_invariant(orbit, L: LensSpace, T: float, tol: float = TAU_ALG, n: int = GRID) -> bool:
    """True iff g^k gamma(s) = gamma(s + T/p) on an n-point grid for some k != 0.

    ``T`` is the period upstairs; times are wrapped modulo T.
    """
    if L.p == 1:
        return True
    s = np.linspace(0.0, T, n, endpoint=False)
    z = _positions(orbit, s)
    shifted = _positions(orbit, np.mod(s + T / L.p, T))
    for k in range(1, L.p):
        M = L.deck(k)
        moved = to_complex(to_real(z) @ M.T)
        if np.abs(moved - shifted).max() < tol * max(1.0, 1.0):
            return True
    return False


def state_defect(a: TangentVector, b: TangentVector) -> float:
    return float(np.linalg.norm(np.concatenate([a.base.coords - b.base.coords, a.vec - b.vec])))


def lens_period(orbit: ClosedFormOrbit, L: LensSpace, tol: float = 1e-8):
    """(T, k) with T the smallest lens period and k the deck power; None if not closed.

    A lens period T satisfies p T = n T_up for the minimal upstairs period T_up.
    """
    T_up = minimal_period(orbit)
    if T_up is None:
        return None
    s = np.linspace(0.0, T_up, 16, endpoint=False)
    z = to_real(orbit.position(s))
    dz = to_real(orbit.velocity(s))
    for n in range(1, L.p + 1):
        T = n * T_up / L.p
        zs = to_real(orbit.position(s + T))
        dzs = to_real(orbit.velocity(s + T))
        for k in range(L.p):
            M = L.deck(k)
            err = max(np.abs(z @ M.T - zs).max(), np.abs(dz @ M.T - dzs).max())
            if err < tol * max(1.0, orbit.c):
                return T, k
    return T_up, 0


def identity_residual(x: SpherePoint, epsilon: float, T: float) -> float:
    """|exp(i eps T) z1 z2 - z1 z2| for a lens period T."""
    z1, z2 = x.z
    return float(abs((np.exp(1j * epsilon * T) - 1.0) * z1 * z2))


def _bound(c: float, m: MagneticParams) -> float:
    if m.epsilon == 0:
        return 2 * np.pi / c
    return period_lower_bound(c, m).bound


def _record(t: TangentVector, orbit: ClosedFormOrbit, L: LensSpace, m: MagneticParams, seed: int, source: str):
    res = lens_period(orbit, L)
    if res is None:
        return None
    T, k = res
    end = evaluate(orbit, T)
    M = L.deck(k)
    target = TangentVector(SpherePoint(M @ t.base.coords), M @ t.vec)
    defect = state_defect(end, target)
    z1, z2 = t.x
    reeb = min(np.linalg.norm(orbit.p_plus), np.linalg.norm(orbit.p_minus)) < 1e-10 and abs(z1 * z2) < 1e-10
    return CensusRecord(
        epsilon=m.epsilon, p=L.p, c=t.speed, delta=t.delta, seed=seed,
        kind="geodesic" if m.epsilon == 0 else "magnetic",
        period=float(T), zp_invariant=k != 0, defect=defect, k=int(k), bound=_bound(t.speed, m),
        x=t.base.coords.tolist(), v=t.vec.tolist(),
        extra={"source": source, "reeb_axis": bool(reeb),
               "identity_residual": identity_residual(t.base, m.epsilon, float(T)),
               "z1z2": float(abs(z1 * z2))},
    )


def _sobol(d: int, n: int, rng) -> np.ndarray:
    m = max(int(np.ceil(np.log2(max(n, 1)))), 0)
    return qmc.Sobol(d=d, seed=rng).random_base2(m)[:n]


# -- structured seeds ----------------------------------------------------------

def reeb_seed(which: str, c: float, phase: float = 0.0) -> TangentVector:
    """Launch along gamma_+ (z2 = 0) or gamma_- (z1 = 0) in the Reeb direction."""
    z = np.array([np.exp(1j * phase), 0]) if which == "+" else np.array([0, np.exp(1j * phase)])
    return TangentVector.from_complex(z, 1j * c * z)


def jx_seed(theta: float, phi1: float, phi2: float, c: float) -> TangentVector:
    z = np.array([np.exp(1j * phi1) * np.sin(theta), np.exp(1j * phi2) * np.cos(theta)])
    x = to_real(z)
    return TangentVector(SpherePoint(x), c * (J_MAT @ x))


def clifford_seed(theta: float, phi1: float, phi2: float, th_plus: float, th_minus: float) -> TangentVector:
    """State of the Clifford-torus orbit (e^{i th+ s} z1, e^{i th- s} z2)."""
    z = np.array([np.exp(1j * phi1) * np.sin(theta), np.exp(1j * phi2) * np.cos(theta)])
    return TangentVector.from_complex(z, 1j * np.array([th_plus, th_minus]) * z)


def seed_with_ratio(rng: np.random.Generator, epsilon: float, num: int, den: int,
                    x: SpherePoint | None = None) -> TangentVector | None:
    """Random state whose orbit has theta_+/theta_- = num/den (a periodic orbit).

    Negative ratios give fast orbits, ratios above one slow ones.  None when no
    admissible speed exists.
    """
    r = num / den
    if epsilon <= 0 or r == 1 or r == -1 or r == 0:
        return None
    a = epsilon * (r - 1) / (2 * (r + 1))
    if a <= 0:
        return None
    K = a * a - epsilon ** 2 / 4
    disc = epsilon ** 2 + 4 * K
    lo = (-epsilon + np.sqrt(disc)) / 2
    hi = (epsilon + np.sqrt(disc)) / 2
    lo = max(lo, 1e-6)
    if hi <= lo:
        return None
    c = lo + (hi - lo) * (0.05 + 0.9 * rng.random())
    delta = (c * c - K) / epsilon
    if abs(delta) >= c:
        return None
    if x is None:
        g = rng.standard_normal(4)
        x = SpherePoint(g / np.linalg.norm(g))
    xc = x.coords
    ix = I_MAT @ xc
    u = rng.standard_normal(4)
    u -= (u @ xc) * xc + (u @ ix) * ix
    u /= np.linalg.norm(u)
    return TangentVector(x, delta * ix + np.sqrt(c * c - delta * delta) * u)


def _structured(L: LensSpace, m: MagneticParams, speeds, n_theta: int, rng):
    eps = m.epsilon
    out = []
    for c in speeds:
        for which in "+-":
            out.append(("reeb", reeb_seed(which, c, rng.uniform(0, 2 * np.pi))))
        # stratified towards the link, where short orbits could hide
        thetas = np.concatenate([np.geomspace(1e-3, 0.3, n_theta // 2),
                                 np.linspace(0.3, np.pi / 2 - 0.3, n_theta // 2 + 1)])
        thetas = np.concatenate([thetas, np.pi / 2 - thetas])
        for th in thetas:
            ph = rng.uniform(0, 2 * np.pi, 2)
            out.append(("jx", jx_seed(th, ph[0], ph[1], c)))
            if eps > 0 and L.p > 1:
                # Clifford orbits: the only non-Reeb shapes a deck shift can preserve
                out.append(("clifford", clifford_seed(th, ph[0], ph[1], c, eps - c)))
                for k in range(1, L.p):
                    # invariant ones have th+ + th- = eps and lens time 2 pi n / eps
                    for n in (1, 2):
                        T = 2 * np.pi * n / eps
                        tp = (2 * np.pi * k / L.p + 2 * np.pi * round(c * T / (2 * np.pi))) / T
                        out.append(("clifford-invariant", clifford_seed(th, ph[0], ph[1], tp, eps - tp)))
    return out


def lens_short_orbit_scan(L: LensSpace, m: MagneticParams, n_seeds: int = 2000, seed: int = 0,
                          speeds=(0.05, 0.3, 1.0), n_theta: int = 16, max_den: int = 40) -> list:
    """Census of magnetic geodesics that close on L(p;1).

    Seeds are the Reeb circles, jx launches and Clifford-torus candidates at the
    given speeds, plus ``n_seeds`` random states with rational frequency ratio
    drawn from a low-discrepancy sequence.  Every closed orbit is reported; the
    ones below the bound carry ``below_bound``.
    """
    rng = np.random.default_rng(seed)
    seeds = _structured(L, m, speeds, n_theta, rng)
    if m.epsilon > 0 and n_seeds > 0:
        sob = _sobol(4, n_seeds, rng)
        for u in sob:
            den = 1 + int(u[0] * max_den)
            num = 1 + int(u[1] * 3 * max_den)
            num = -num if u[2] < 0.8 else num + den  # mostly fast, some slow
            # stratify theta near the link via the base point
            th = 0.5 * np.pi * u[3] ** 2 if rng.random() < 0.5 else 0.5 * np.pi * (1 - u[3] ** 2)
            ph = rng.uniform(0, 2 * np.pi, 2)
            x = SpherePoint.from_complex(np.exp(1j * ph[0]) * np.sin(th), np.exp(1j * ph[1]) * np.cos(th))
            t = seed_with_ratio(rng, m.epsilon, num, den, x)
            if t is not None:
                seeds.append(("ratio", t))
    elif n_seeds > 0:
        for _ in range(n_seeds):
            seeds.append(("random", random_tangent(rng, speed=rng.choice(speeds))))
    out = []
    for i, (src, t) in enumerate(seeds):
        try:
            orbit = solve_closed_form(t, m)
        except DegenerateInput:
            continue
        rec = _record(t, orbit, L, m, i, src)
        # a rational match on the frequency ratio is only accepted if the orbit really closes
        if rec is not None and rec.defect < TAU_CLOSE * max(1.0, rec.c):
            out.append(rec)
    return out


def revalidate(rec: CensusRecord, tol: float = 1e-8) -> bool:
    """Recompute a magnetic-geodesic record from its stored seed state."""
    t = rec.tangent()
    m = MagneticParams(rec.epsilon)
    L = LensSpace(rec.p)
    orbit = solve_closed_form(t, m)
    res = lens_period(orbit, L)
    if res is None:
        return False
    T, k = res
    return abs(T - rec.period) <= tol * max(1.0, T) and (k != 0) == rec.zp_invariant


# -- symmetric bounce configurations ---------------------------------------------

def _link_profile(orbit: BounceOrbit, T: float, n: int = 512) -> np.ndarray:
    z = orbit.positions(np.linspace(0.0, T, n))
    theta = np.arccos(np.clip(np.abs(z[:, 1]), 0.0, 1.0))
    return link_distance(theta)


def reeb_winding(orbit: BounceOrbit, T: float, n: int = 4096) -> float:
    """Net turns of the fibre phase arg(z1) + arg(z2) over [0, T]."""
    z = orbit.positions(np.linspace(0.0, T, n))
    ph = np.unwrap(np.angle(z[:, 0]) + np.angle(z[:, 1]))
    return float((ph[-1] - ph[0]) / (2 * np.pi))


def bounce_seeds(rng, wall_eps: float, n: int, speed: float = 1.0):
    """Launch states on a wall, spread over the outgoing half-sphere of directions."""
    out = []
    sob = _sobol(3, n, rng)
    for u in sob:
        cap = CapGeometry(wall_eps, "north" if u[0] < 0.5 else "south")
        theta = np.pi / 2 - wall_eps if cap.which == "north" else wall_eps
        s, c = np.sin(theta), np.cos(theta)
        # direction: polar angle from the normal, azimuth in the (phi1, phi2) plane
        pol = 0.5 * np.pi * u[1] * 0.98
        az = 2 * np.pi * u[2]
        w1, w2 = speed * np.sin(pol) * np.cos(az), speed * np.sin(pol) * np.sin(az)
        t = wall_state(cap, speed, w1 / s, w2 / c, rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
        if t is not None:
            out.append(t)
    return out


def _bounce_record(orbit: BounceOrbit, L: LensSpace, m: MagneticParams, wall_eps: float, seed: int, k: int):
    T = orbit.period
    start = orbit.arcs[0]
    t0 = evaluate(start.orbit, 0.0)
    bound = _bound(t0.speed, m)
    full = trace_billiard(t0, m, wall_eps, L.p * T * (1 + 1e-9))
    inv = is_zp_invariant(full, L, L.p * T, tol=1e-7) if k else False
    dist = _link_profile(orbit, T)
    trapped = bool(dist.max() <= np.sqrt(max(m.epsilon, wall_eps)))
    return CensusRecord(
        epsilon=m.epsilon, p=L.p, c=t0.speed, delta=t0.delta, seed=seed,
        kind="trapped" if trapped else "bounce", period=float(T), zp_invariant=bool(inv),
        defect=float(orbit.defect), k=int(k), bound=bound,
        x=t0.base.coords.tolist(), v=t0.vec.tolist(),
        extra={"events": len(orbit.events), "type": orbit.type,
               "reeb_winding_upstairs": reeb_winding(full, L.p * T),
               "min_link_distance": float(dist.min()), "max_link_distance": float(dist.max())},
    )


def zp_symmetric_bounce_scan(L: LensSpace, m: MagneticParams, wall_eps: float, n_seeds: int = 200,
                             seed: int = 0, max_cycles: int | None = None, include_plain: bool = False,
                             speed: float = 1.0) -> list:
    """Periodic bounce orbits closing up to a deck transformation g^k, k != 0.

    For p = 1, or with ``include_plain``, ordinary periodic bounce orbits
    (k = 0) are searched as well; they also close on the quotient.
    Duplicates (same period and deck power) are merged.
    """
    rng = np.random.default_rng(seed)
    if max_cycles is None:
        max_cycles = max(12, 3 * L.p)
    powers = list(range(1, L.p))
    if L.p == 1 or include_plain:
        powers = [0] + powers
    out, seen = [], set()
    for i, t in enumerate(bounce_seeds(rng, wall_eps, n_seeds, speed)):
        for k in powers:
            orbit = find_periodic_bounce(t, m, wall_eps, max_cycles=max_cycles,
                                         zp=(L.p, k) if k else None)
            if orbit is None or not orbit.events:
                continue
            key = (k, round(orbit.period, 7), len(orbit.events))
            if key in seen:
                continue
            seen.add(key)
            out.append(_bounce_record(orbit, L, m, wall_eps, i, k))
    return out
