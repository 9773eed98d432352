"""Ideal magnetic billiard on S^3 with two caps around the Hopf link removed.

The table is ``{eps_w <= theta <= pi/2 - eps_w}``.  Between bounces the motion
is an exact magnetic geodesic; at the wall the theta-velocity is reversed while
``phi1'``, ``phi2'`` are kept, which preserves speed, delta, c1 and c2.

Along a closed-form arc ``|z1(s)|^2 = A + B cos(w s + phase)`` with
``w = theta_+ - theta_-``, so wall contacts are located in closed form and then
polished with Brent's method.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import GeometryError, NoIntersection
from .flow import ClosedFormOrbit, evaluate, minimal_period, solve_closed_form
from .geometry import MagneticParams, TangentVector, to_real
from .reduced import ReducedState, from_reduced, link_distance, to_reduced

GRAZING_TOL = 1e-10
WALL_TOL = 1e-9
TAU_CLOSE = 1e-9


@dataclass(frozen=True)
class CapGeometry:
    """One of the two caps; ``which`` is 'north' (around gamma_+) or 'south'.

    ``r`` is the Euclidean radius, in its own plane, of the projected boundary
    circle on S^2(1/2).
    """

    wall_colatitude: float
    which: str

    @property
    def r(self) -> float:
        return 0.5 * float(np.sin(2.0 * self.wall_colatitude))

    @property
    def level(self) -> float:
        """Value of |z1|^2 on the wall."""
        if self.which == "north":
            return float(np.cos(self.wall_colatitude) ** 2)
        return float(np.sin(self.wall_colatitude) ** 2)

    @property
    def center(self) -> np.ndarray:
        z = 0.5 * np.cos(2.0 * self.wall_colatitude)
        return np.array([0.0, 0.0, z if self.which == "north" else -z])


@dataclass(frozen=True, eq=False)
class BounceEvent:
    time: float
    state_in: TangentVector
    state_out: TangentVector
    cap: CapGeometry


@dataclass(frozen=True, eq=False)
class Arc:
    orbit: ClosedFormOrbit
    start: float
    duration: float


@dataclass(frozen=True, eq=False)
class BounceOrbit:
    arcs: list
    events: list
    epsilon: float
    wall_eps: float
    tangencies: list = field(default_factory=list)
    period: float | None = None
    defect: float | None = None

    @property
    def type(self) -> int:
        caps = {e.cap.which for e in self.events}
        return 1 + len(caps)

    @property
    def duration(self) -> float:
        last = self.arcs[-1]
        return last.start + last.duration

    def _arc_at(self, t: float) -> Arc:
        starts = [a.start for a in self.arcs]
        k = int(np.searchsorted(starts, t, side="right")) - 1
        return self.arcs[max(k, 0)]

    def evaluate(self, t: float) -> TangentVector:
        arc = self._arc_at(t)
        return evaluate(arc.orbit, t - arc.start)

    def positions(self, ts) -> np.ndarray:
        """Complex positions at the given times, shape (n, 2)."""
        ts = np.asarray(ts, dtype=float)
        out = np.empty((len(ts), 2), dtype=complex)
        starts = np.array([a.start for a in self.arcs])
        idx = np.clip(np.searchsorted(starts, ts, side="right") - 1, 0, len(self.arcs) - 1)
        for k in np.unique(idx):
            sel = idx == k
            arc = self.arcs[k]
            out[sel] = arc.orbit.position(ts[sel] - arc.start)
        return out

    @property
    def final_state(self) -> TangentVector:
        last = self.arcs[-1]
        return evaluate(last.orbit, last.duration)


def _caps(wall_eps: float):
    return CapGeometry(wall_eps, "north"), CapGeometry(wall_eps, "south")


def theta_dot(t: TangentVector) -> float:
    """Component of v along the unit coordinate field d/dtheta."""
    return _normal(t) @ t.vec


def _normal(t: TangentVector) -> np.ndarray:
    z1, z2 = t.x
    s, c = abs(z1), abs(z2)
    e1 = z1 / s if s > 0 else 1.0
    e2 = z2 / c if c > 0 else 1.0
    return to_real(np.array([e1 * c, -e2 * s]))


def which_cap_contact(t: TangentVector, wall_eps: float, tol: float = WALL_TOL):
    theta = float(np.arccos(np.clip(abs(t.x[1]), 0.0, 1.0)))
    if abs(theta - (np.pi / 2 - wall_eps)) < tol:
        return CapGeometry(wall_eps, "north")
    if abs(theta - wall_eps) < tol:
        return CapGeometry(wall_eps, "south")
    return None


def reflect(t: TangentVector, cap: CapGeometry) -> TangentVector:
    """Reverse the theta-velocity at a wall point, keeping phi1', phi2'."""
    theta = float(np.arccos(np.clip(abs(t.x[1]), 0.0, 1.0)))
    target = np.pi / 2 - cap.wall_colatitude if cap.which == "north" else cap.wall_colatitude
    if abs(theta - target) > WALL_TOL:
        raise GeometryError(f"base point is not on the {cap.which} wall (theta = {theta!r})")
    n = _normal(t)
    thd = n @ t.vec
    inward = thd if cap.which == "north" else -thd
    if inward < -1e-12 * max(t.speed, 1.0):
        raise GeometryError("velocity points out of the cap")
    return TangentVector(t.base, t.vec - 2.0 * thd * n)


def _sinusoid(orbit: ClosedFormOrbit):
    p1, m1 = orbit.p_plus[0], orbit.p_minus[0]
    A = abs(p1) ** 2 + abs(m1) ** 2
    q = p1 * np.conj(m1)
    return A, 2.0 * abs(q), float(np.angle(q)), orbit.rotation_frequency


def _entry_time(orbit: ClosedFormOrbit, cap: CapGeometry, s_min: float):
    """First s > s_min at which the arc enters ``cap`` (None if it never does)."""
    A, B, phase, w = _sinusoid(orbit)
    if B <= 0 or w <= 0:
        return None
    kappa = (cap.level - A) / B
    if abs(kappa) > 1.0:
        return None
    beta = float(np.arccos(kappa))
    target = -beta if cap.which == "north" else beta
    period = 2 * np.pi / w
    s = np.mod(target - phase, 2 * np.pi) / w
    while s <= s_min:
        s += period
    # polish on the closed-form |z1|^2
    f = lambda u: A + B * np.cos(w * u + phase) - cap.level
    h = 1e-7 * period
    lo, hi = max(s - h, 0.5 * (s + s_min) if s - h <= s_min else s - h), s + h
    if f(lo) * f(hi) < 0:
        s = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return s


def _next_contact(orbit: ClosedFormOrbit, caps, s_min: float):
    best = None
    for cap in caps:
        s = _entry_time(orbit, cap, s_min)
        if s is not None and (best is None or s < best[0]):
            best = (s, cap)
    return best


def trace_billiard(t0: TangentVector, m: MagneticParams, wall_eps: float, t_end: float,
                   max_events: int = 100000, stop_after: int | None = None) -> BounceOrbit:
    """Follow the billiard from ``t0`` for time ``t_end``.

    ``stop_after`` ends the trace right after that many bounces.
    """
    theta = float(np.arccos(np.clip(abs(t0.x[1]), 0.0, 1.0)))
    if link_distance(theta) < wall_eps - WALL_TOL:
        raise GeometryError("initial point lies inside a cap")
    caps = _caps(wall_eps)
    arcs, events, tangencies = [], [], []
    t, state = 0.0, t0
    s_min = 0.0
    while True:
        orbit = solve_closed_form(state, m)
        guard = 1e-10 * 2 * np.pi / orbit.rotation_frequency
        hit = _next_contact(orbit, caps, max(s_min, guard) if events else s_min)
        if hit is None or t + hit[0] >= t_end or len(events) >= max_events:
            arcs.append(Arc(orbit, t, t_end - t))
            break
        s, cap = hit
        arrive = evaluate(orbit, s)
        if abs(theta_dot(arrive)) < GRAZING_TOL:
            tangencies.append(t + s)
            s_min = s + guard
            # keep following the same arc past the tangency
            arcs.append(Arc(orbit, t, s))
            t, state = t + s, arrive
            s_min = guard
            continue
        leave = reflect(arrive, cap)
        arcs.append(Arc(orbit, t, s))
        events.append(BounceEvent(t + s, arrive, leave, cap))
        t, state, s_min = t + s, leave, 0.0
        if stop_after is not None and len(events) >= stop_after:
            break
    return BounceOrbit(arcs, events, m.epsilon, wall_eps, tangencies)


def reverse_state(t: TangentVector) -> TangentVector:
    return TangentVector(t.base, -t.vec)


def cap_entry_angle(R: float, d: float, r: float, tol: float = 1e-12) -> float:
    """Angle at the orbit-circle centre between the cap centre and an intersection point."""
    if R <= 0 or d <= 0 or r < 0:
        raise NoIntersection("radii and distance must be positive")
    if d < abs(R - r) - tol or d > R + r + tol:
        raise NoIntersection(f"circles of radius {R!r}, {r!r} at distance {d!r} do not meet")
    cos_a = (d * d - r * r + R * R) / (2.0 * d * R)
    return float(np.arccos(np.clip(cos_a, -1.0, 1.0)))


def smooth_cap_angle(t: TangentVector, m: MagneticParams, cap: CapGeometry):
    """Half the phase the smooth (unreflected) orbit spends inside ``cap``.

    This equals the angle at the centre of the projected circle between the
    cap-facing direction and a wall crossing.  None if the orbit misses the cap.
    """
    A, B, phase, w = _sinusoid(solve_closed_form(t, m))
    if B <= 0:
        return None
    kappa = (cap.level - A) / B
    if cap.which == "north":
        if kappa >= 1:
            return None
        return float(np.arccos(max(kappa, -1.0)))
    if kappa <= -1:
        return None
    return float(np.pi - np.arccos(min(kappa, 1.0)))


def caps_reached(t: TangentVector, m: MagneticParams, wall_eps: float) -> set:
    """Caps whose wall level is crossed by the smooth orbit through ``t``."""
    A, B, _, _ = _sinusoid(solve_closed_form(t, m))
    out = set()
    for cap in _caps(wall_eps):
        if B > 0 and abs((cap.level - A) / B) < 1.0:
            out.add(cap.which)
    return out


# -- periodic bounce orbits -------------------------------------------------

def wall_state(cap: CapGeometry, speed: float, phi1_dot: float, phi2_dot: float,
               phi1: float = 0.0, phi2: float = 0.0) -> TangentVector | None:
    """State on the wall of ``cap`` leaving the cap; None if the speed is too small."""
    theta = np.pi / 2 - cap.wall_colatitude if cap.which == "north" else cap.wall_colatitude
    s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
    rest = speed ** 2 - s2 * phi1_dot ** 2 - c2 * phi2_dot ** 2
    if rest <= 0:
        return None
    thd = np.sqrt(rest) * (-1.0 if cap.which == "north" else 1.0)
    return from_reduced(ReducedState(theta, phi1, phi2, thd, phi1_dot, phi2_dot))


def _cycle(state: TangentVector, m: MagneticParams, wall_eps: float, cap: CapGeometry, t_cap: float):
    """Trace from a post-bounce wall state until the next bounce at the same cap."""
    orbit = trace_billiard(state, m, wall_eps, t_cap, stop_after=2)
    ev = orbit.events
    if not ev:
        return None
    if ev[0].cap.which == cap.which:
        n = 1
    elif len(ev) > 1 and ev[1].cap.which == cap.which:
        n = 2
    else:
        return None
    return ev[n - 1].time, ev[n - 1].state_out, n


def _angles(t: TangentVector):
    z1, z2 = t.x
    return float(np.angle(z1)), float(np.angle(z2))


def cycle_data(state: TangentVector, m: MagneticParams, wall_eps: float, cap: CapGeometry,
               t_cap: float = 1e3):
    """(cycle time, d phi1, d phi2, bounces per cycle) of the section return map."""
    res = _cycle(state, m, wall_eps, cap, t_cap)
    if res is None:
        return None
    T, back, n = res
    a0, b0 = _angles(state)
    a1, b1 = _angles(back)
    return T, a1 - a0, b1 - b0, n


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def closure_defect(a: TangentVector, b: TangentVector) -> float:
    return float(np.linalg.norm(np.concatenate([a.base.coords - b.base.coords, a.vec - b.vec])))


def find_periodic_bounce(seed: TangentVector, m: MagneticParams, wall_eps: float, n_cycles: int | None = None,
                         max_cycles: int = 12, zp: tuple | None = None, max_iter: int = 200,
                         tol: float = TAU_CLOSE) -> BounceOrbit | None:
    """Shoot for a periodic bounce orbit near ``seed``.

    The section is the wall of the first cap hit; the unknowns are the two
    angular velocities (phi1', phi2') at fixed speed, and the residual is the
    phase mismatch after ``n_cycles`` returns.  ``zp = (p, k)`` asks instead for
    closure up to the deck transformation exp(2 pi j k / p).
    Returns None when the seed never bounces or Newton fails within max_iter.
    """
    first = trace_billiard(seed, m, wall_eps, 1e3, stop_after=1)
    if not first.events:
        # type 1: a bounce-free orbit is periodic iff the smooth geodesic is
        smooth = solve_closed_form(seed, m)
        T = minimal_period(smooth)
        if T is None:
            return None
        end = evaluate(smooth, T)
        defect = closure_defect(end, seed)
        if defect >= tol:
            return None
        return BounceOrbit([Arc(smooth, 0.0, T)], [], m.epsilon, wall_eps, [], T, defect)
    ev = first.events[0]
    cap = ev.cap
    r0 = to_reduced(ev.state_out)
    speed = ev.state_out.speed
    shift = np.zeros(2)
    if zp is not None:
        p, k = zp
        shift = np.array([2 * np.pi * k / p, -2 * np.pi * k / p])

    def data(u):
        st = wall_state(cap, speed, u[0], u[1], r0.phi1, r0.phi2)
        if st is None:
            return None
        return cycle_data(st, m, wall_eps, cap)

    u = np.array([r0.phi1_dot, r0.phi2_dot])
    d0 = data(u)
    if d0 is None:
        return None
    delta = np.array(d0[1:3])
    if n_cycles is None:
        errs = [np.abs(_wrap(n * delta - shift)).max() for n in range(1, max_cycles + 1)]
        n_cycles = int(np.argmin(errs)) + 1

    def resid(v):
        d = data(v)
        if d is None:
            return None
        return _wrap(n_cycles * np.array(d[1:3]) - shift)

    res = resid(u)
    for _ in range(max_iter):
        if res is None:
            return None
        if np.abs(res).max() < 1e-13:
            break
        h = 1e-7 * max(1.0, np.abs(u).max())
        Jac = np.empty((2, 2))
        for i in range(2):
            du = np.zeros(2)
            du[i] = h
            rp, rm = resid(u + du), resid(u - du)
            if rp is None or rm is None:
                return None
            Jac[:, i] = _wrap(rp - rm) / (2 * h)
        try:
            step = np.linalg.solve(Jac, -res)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        base = np.abs(res).max()
        while lam > 1e-4:
            trial = resid(u + lam * step)
            if trial is not None and np.abs(trial).max() < base:
                break
            lam *= 0.5
        else:
            return None
        u = u + lam * step
        res = trial
    else:
        return None
    start = wall_state(cap, speed, u[0], u[1], r0.phi1, r0.phi2)
    d = cycle_data(start, m, wall_eps, cap)
    if d is None:
        return None
    T = n_cycles * d[0]
    orbit = trace_billiard(start, m, wall_eps, T * (1 + 1e-12) + 1e-12, stop_after=n_cycles * d[3])
    end = orbit.events[-1].state_out if orbit.events else orbit.final_state
    T = orbit.events[-1].time
    target = start
    if zp is not None:
        from .geometry import zp_action_tangent
        target = zp_action_tangent(start, zp[0], zp[1])
    defect = closure_defect(end, target)
    if defect >= tol:
        return None
    return BounceOrbit(orbit.arcs, orbit.events, m.epsilon, wall_eps, orbit.tangencies, T, defect)


# -- mirror unfolding ---------------------------------------------------------

def mirror_map(x_contact: np.ndarray):
    """Isometry z_k -> exp(2 i phi_k) conj(z_k) fixing the contact point (complex input)."""
    ph = np.exp(2j * np.angle(x_contact))
    return lambda z: ph * np.conj(z)


def excursion_time(orbit: ClosedFormOrbit, wall_eps: float) -> float:
    """Time the smooth orbit needs from leaving one wall to reaching the next one.

    The orbit must start on a wall, moving into the table.
    """
    caps = _caps(wall_eps)
    guard = 1e-10 * 2 * np.pi / orbit.rotation_frequency
    hit = _next_contact(orbit, caps, guard)
    if hit is None:
        raise GeometryError("smooth orbit never reaches a wall")
    return hit[0]


@dataclass(frozen=True)
class MirrorCheck:
    bounce_period: float
    mirror_period: float
    unfold_error: float

    @property
    def relative_gap(self) -> float:
        return abs(self.bounce_period - self.mirror_period) / self.mirror_period


def mirror_extension(orbit: BounceOrbit, samples_per_arc: int = 16) -> MirrorCheck:
    """Unfold a bounce orbit onto the smooth magnetic geodesic of its first arc.

    Each bounce is undone by the mirror isometry fixing the contact point,
    composed with time reversal.  The unfolded arcs must lie on the smooth
    geodesic; the mirror period is the number of arcs times the smooth
    wall-to-wall time of that geodesic.
    """
    if orbit.period is None:
        raise ValueError("orbit is not a periodic bounce orbit")
    arcs = [a for a in orbit.arcs if a.start < orbit.period - 1e-12]
    smooth = arcs[0].orbit
    tau = excursion_time(smooth, orbit.wall_eps)
    maps = []
    sign, offset = 1.0, 0.0  # smooth time = sign * t + offset
    err = 0.0
    for k, arc in enumerate(arcs):
        if k > 0:
            ev = orbit.events[k - 1]
            maps.append(mirror_map(ev.state_in.x))
            tb = ev.time
            sign, offset = -sign, sign * 2 * tb + offset
        ts = arc.start + np.linspace(0.0, arc.duration, samples_per_arc)
        z = arc.orbit.position(ts - arc.start)
        for M in reversed(maps):
            z = M(z)
        ref = smooth.position(sign * ts + offset)
        err = max(err, float(np.abs(z - ref).max()))
    return MirrorCheck(orbit.period, len(arcs) * tau, err)
