"""Integrable reduction in Hopf coordinates.

Coordinates ``z1 = exp(i phi1) sin(theta)``, ``z2 = exp(i phi2) cos(theta)``
with metric ``d theta^2 + sin^2 d phi1^2 + cos^2 d phi2^2``.  The Lagrangian is

    L = 1/2 |v|^2 + eps (sin^2 phi1' + cos^2 phi2') - V(theta)

so the momenta ``c1 = sin^2 (phi1' + eps)`` and ``c2 = cos^2 (phi2' + eps)`` and
the energy ``|v|^2/2 + V`` are conserved, and ``delta = c1 + c2 - eps``.

The coupling ``eps`` here multiplies ``<ix, v>`` directly, so the ambient
equation ``gamma'' = i e gamma' + ...`` with ``e = -2 eps`` describes the same
motion away from the potential (see :func:`ambient_params`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import ode, IntegrationWarning, quad, solve_ivp

from .errors import ChartDomainError, IntegrationError, InfinitePotential, NotLibrating
from .geometry import MagneticParams, SpherePoint, TangentVector, to_real

CHART_EPS = 1e-12


@dataclass(frozen=True)
class ReducedState:
    theta: float
    phi1: float
    phi2: float
    theta_dot: float
    phi1_dot: float
    phi2_dot: float

    @property
    def speed_sq(self) -> float:
        s, c = np.sin(self.theta), np.cos(self.theta)
        return self.theta_dot ** 2 + (s * self.phi1_dot) ** 2 + (c * self.phi2_dot) ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.phi1, self.phi2,
                         self.theta_dot, self.phi1_dot, self.phi2_dot])


@dataclass(frozen=True)
class ConservedSet:
    c1: float
    c2: float
    energy: float
    delta: float


@dataclass(frozen=True)
class PotentialSpec:
    """Barrier potential depending only on the distance to the Hopf link.

    ``V = B ((eps - d) / (d - (eps - eps**k)))**2`` for ``eps - eps**k < d < eps``,
    zero for ``d >= eps`` and infinite inside the inner wall.
    """

    epsilon: float
    sharpness: float = 4.0
    strength: float = 1.0
    profile: str = "polynomial-barrier"

    @property
    def wall(self) -> float:
        return self.epsilon

    @property
    def inner_wall(self) -> float:
        return self.epsilon - self.epsilon ** self.sharpness

    @property
    def active(self) -> bool:
        return self.profile != "none" and self.epsilon > 0 and self.strength > 0

    @classmethod
    def none(cls) -> "PotentialSpec":
        return cls(0.0, profile="none")


def ambient_params(m: MagneticParams) -> MagneticParams:
    """Ambient strength reproducing the reduced coupling ``m`` (factor -2)."""
    return MagneticParams(-2.0 * m.epsilon)


def reduced_params(m_ambient: MagneticParams) -> MagneticParams:
    return MagneticParams(-0.5 * m_ambient.epsilon)


def link_distance(theta):
    return np.minimum(theta, np.pi / 2 - theta)


def _potential(V: PotentialSpec, theta):
    """Potential and its theta-derivative, vectorised; inf inside the inner wall."""
    theta = np.asarray(theta, dtype=float)
    val = np.zeros_like(theta)
    der = np.zeros_like(theta)
    if not V.active:
        return val, der
    d = link_distance(theta)
    sgn = np.where(theta < np.pi / 4, 1.0, -1.0)
    inner = V.inner_wall
    width = V.epsilon - inner
    collar = (d < V.epsilon) & (d > inner)
    gap = np.where(collar, d - inner, 1.0)
    u = np.where(collar, (V.epsilon - d) / gap, 0.0)
    val = np.where(collar, V.strength * u * u, val)
    der = np.where(collar, -2.0 * V.strength * u * width / gap ** 2 * sgn, der)
    wall = d <= inner
    val = np.where(wall, np.inf, val)
    der = np.where(wall, np.nan, der)
    return val, der


def potential_value(V: PotentialSpec, theta: float) -> float:
    if not 0 < theta < np.pi / 2:
        raise ChartDomainError(f"theta = {theta!r} outside (0, pi/2)")
    val = float(_potential(V, theta)[0])
    if not np.isfinite(val):
        raise InfinitePotential(f"theta = {theta!r} is behind the inner wall")
    return val


def potential_derivative(V: PotentialSpec, theta: float) -> float:
    return float(_potential(V, theta)[1])


def to_reduced(t: TangentVector) -> ReducedState:
    z1, z2 = t.x
    w1, w2 = t.v
    s, c = abs(z1), abs(z2)
    if s < CHART_EPS or c < CHART_EPS:
        raise ChartDomainError("base point lies on the Hopf link (theta in {0, pi/2})")
    theta = float(np.arccos(np.clip(c, 0.0, 1.0)))
    e1, e2 = z1 / s, z2 / c
    u1 = w1 * np.conj(e1)
    u2 = w2 * np.conj(e2)
    st, ct = np.sin(theta), np.cos(theta)
    return ReducedState(
        theta,
        float(np.mod(np.angle(z1), 2 * np.pi)),
        float(np.mod(np.angle(z2), 2 * np.pi)),
        float(ct * u1.real - st * u2.real),
        float(u1.imag / st),
        float(u2.imag / ct),
    )


def from_reduced(r: ReducedState) -> TangentVector:
    st, ct = np.sin(r.theta), np.cos(r.theta)
    if st < CHART_EPS or ct < CHART_EPS:
        raise ChartDomainError("theta on the Hopf link")
    e1, e2 = np.exp(1j * r.phi1), np.exp(1j * r.phi2)
    z = np.array([e1 * st, e2 * ct])
    w = np.array([e1 * (ct * r.theta_dot + 1j * st * r.phi1_dot),
                  e2 * (-st * r.theta_dot + 1j * ct * r.phi2_dot)])
    return TangentVector(SpherePoint(to_real(z)), to_real(w))


def conserved_set(r: ReducedState, m: MagneticParams, V: PotentialSpec | None = None) -> ConservedSet:
    eps = m.epsilon
    s2, c2 = np.sin(r.theta) ** 2, np.cos(r.theta) ** 2
    pot = 0.0 if V is None else float(_potential(V, r.theta)[0])
    return ConservedSet(
        c1=float(s2 * (r.phi1_dot + eps)),
        c2=float(c2 * (r.phi2_dot + eps)),
        energy=0.5 * r.speed_sq + pot,
        delta=float(s2 * r.phi1_dot + c2 * r.phi2_dot),
    )


def effective_potential(cs: ConservedSet, m: MagneticParams, V: PotentialSpec, theta):
    theta = np.asarray(theta, dtype=float)
    if np.any((theta <= 0) | (theta >= np.pi / 2)):
        raise ChartDomainError("theta outside (0, pi/2)")
    eps = m.epsilon
    s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
    w = (0.5 * s2 * (cs.c1 / s2 - eps) ** 2 + 0.5 * c2 * (cs.c2 / c2 - eps) ** 2
         + _potential(V, theta)[0])
    return w if w.ndim else float(w)


def _scan_grid(V: PotentialSpec) -> np.ndarray:
    half = np.pi / 2
    parts = [np.linspace(0, half, 4001)[1:-1],
             np.geomspace(1e-10, 0.05, 400), half - np.geomspace(1e-10, 0.05, 400)]
    if V.active:
        lo, hi = V.inner_wall, V.epsilon
        collar = np.linspace(lo, hi, 2001)[1:]
        parts += [collar, half - collar]
    g = np.unique(np.concatenate(parts))
    return g[(g > 0) & (g < half)]


def turning_points(cs: ConservedSet, m: MagneticParams, V: PotentialSpec, xtol: float = 1e-12) -> list:
    """Roots of energy - W(theta) in (0, pi/2), by sign scan and bisection."""
    if not np.isfinite(cs.energy):
        raise ValueError("energy must be finite")

    def g(th):
        with np.errstate(invalid="ignore", over="ignore"):
            w = effective_potential(cs, m, V, th)
        return np.where(np.isfinite(w), cs.energy - w, -np.inf)

    grid = _scan_grid(V)
    vals = g(grid)
    pos = vals > 0
    roots = []
    for k in np.nonzero(pos[1:] != pos[:-1])[0]:
        lo, hi = grid[k], grid[k + 1]
        lo_pos = pos[k]
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            if (float(g(mid)) > 0) == lo_pos:
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return roots


def _libration_bracket(cs, m, V, theta=None):
    roots = turning_points(cs, m, V)
    for lo, hi in zip(roots[:-1], roots[1:]):
        mid = 0.5 * (lo + hi)
        inside = cs.energy - effective_potential(cs, m, V, mid) > 0
        if inside and (theta is None or lo - 1e-9 <= theta <= hi + 1e-9):
            return lo, hi
    raise NotLibrating("theta motion does not librate between two turning points")


def _scalar_potential(V: PotentialSpec):
    """Scalar twin of the barrier, for quadrature integrands."""
    if not V.active:
        return lambda th: 0.0
    eps, inner, B = V.epsilon, V.inner_wall, V.strength
    half = np.pi / 2

    def val(th):
        d = th if th < half - th else half - th
        if d >= eps:
            return 0.0
        gap = d - inner
        if gap <= 0:
            return math.inf
        u = (eps - d) / gap
        return B * u * u

    return val


def _libration_integral(cs, m, V, theta, weight):
    """2 * int weight(theta) dtheta / sqrt(2 (energy - W)) over one libration."""
    lo, hi = _libration_bracket(cs, m, V, theta)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    eps, E, c1, c2 = m.epsilon, cs.energy, cs.c1, cs.c2
    pot = _scalar_potential(V)
    sin, cos, sqrt = math.sin, math.cos, math.sqrt

    def integrand(u):
        th = mid + half * sin(u)
        s2, k2 = sin(th) ** 2, cos(th) ** 2
        w = 0.5 * s2 * (c1 / s2 - eps) ** 2 + 0.5 * k2 * (c2 / k2 - eps) ** 2 + pot(th)
        gap = E - w
        if gap <= 0:
            return 0.0
        return weight(th) * half * cos(u) / sqrt(2.0 * gap)

    breaks = []
    if V.active:
        for th in (V.epsilon, np.pi / 2 - V.epsilon):
            if lo < th < hi:
                breaks.append(float(np.arcsin((th - mid) / half)))
    with warnings.catch_warnings():
        # the collar pieces are tiny; quad's roundoff warning there is benign
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(integrand, -np.pi / 2, np.pi / 2, epsabs=0.0, epsrel=1e-12, limit=400,
                      points=breaks or None)
    return 2.0 * val


def quadrature_period(cs: ConservedSet, m: MagneticParams, V: PotentialSpec, theta: float | None = None) -> float:
    """Libration period 2 int dtheta / sqrt(2 (energy - W)).

    The substitution theta = mid + half sin(u) removes the inverse square-root
    singularities at the turning points.
    """
    return _libration_integral(cs, m, V, theta, lambda th: 1.0)


def phase_advance(cs: ConservedSet, m: MagneticParams, V: PotentialSpec, theta: float | None = None):
    """Advance of (phi1, phi2) over one libration of theta."""
    eps = m.epsilon
    d1 = _libration_integral(cs, m, V, theta, lambda th: cs.c1 / math.sin(th) ** 2 - eps)
    d2 = _libration_integral(cs, m, V, theta, lambda th: cs.c2 / math.cos(th) ** 2 - eps)
    return d1, d2


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (n, 6): theta, phi1, phi2, theta', phi1', phi2'
    status: str = "ok"
    message: str = ""
    events: dict = field(default_factory=dict)

    def state(self, k: int) -> ReducedState:
        return ReducedState(*map(float, self.y[k]))

    def conserved(self, m: MagneticParams, V: PotentialSpec) -> dict:
        th, _, _, thd, p1d, p2d = self.y.T
        s2, c2 = np.sin(th) ** 2, np.cos(th) ** 2
        eps = m.epsilon
        c1 = s2 * (p1d + eps)
        cc2 = c2 * (p2d + eps)
        energy = 0.5 * (thd ** 2 + s2 * p1d ** 2 + c2 * p2d ** 2) + _potential(V, th)[0]
        return {"c1": c1, "c2": cc2, "energy": energy, "delta": s2 * p1d + c2 * p2d}


def _scalar_dpotential(V: PotentialSpec):
    if not V.active:
        return lambda th: 0.0
    eps, inner, B = V.epsilon, V.inner_wall, V.strength
    width = eps - inner
    quarter = np.pi / 4

    def dV(th):
        if th < quarter:
            d, sgn = th, 1.0
        else:
            d, sgn = np.pi / 2 - th, -1.0
        if d >= eps:
            return 0.0
        gap = d - inner
        if gap <= 0:
            return math.nan
        return -2.0 * B * (eps - d) * width / (gap * gap * gap) * sgn

    return dV


def _rhs(m: MagneticParams, V: PotentialSpec):
    eps = m.epsilon
    dV = _scalar_dpotential(V)
    sin, cos = math.sin, math.cos

    def f(_t, y):
        th, _, _, thd, p1d, p2d = y
        s, c = sin(th), cos(th)
        thdd = s * c * (p1d * p1d - p2d * p2d) + 2 * eps * s * c * (p1d - p2d) - dV(th)
        p1dd = -2.0 * (c / s) * thd * (p1d + eps)
        p2dd = 2.0 * (s / c) * thd * (p2d + eps)
        return np.array([thd, p1d, p2d, thdd, p1dd, p2dd])

    return f


def _leg(rhs, t0, y0, t1, rtol, atol, watch, side):
    """Compiled DOP853 from t0 to t1, stopping after the first step on which
    ``watch`` leaves the side ``side``.  Returns accepted steps after t0 and
    whether it stopped early."""
    ts, ys = [], []

    def solout(t, y):
        if t > t0:
            ts.append(t)
            ys.append(y.copy())
            if watch(y) * side < 0:
                return -1
        return 0

    o = ode(rhs).set_integrator("dop853", rtol=rtol, atol=atol, nsteps=10 ** 7)
    o.set_solout(solout)
    o.set_initial_value(y0, t0)
    o.integrate(t1)
    code = o.get_return_code()
    if code < 0:
        raise IntegrationError(f"dop853 failed with code {code}")
    return ts, ys, code == 2


def integrate(r0: ReducedState, m: MagneticParams, V: PotentialSpec, t_end: float, dt: float | None = None,
              rtol: float = 1e-12, atol: float = 1e-13, chart_margin: float = 1e-6) -> Trajectory:
    """Euler-Lagrange integration (DOP853) of the reduced Lagrangian.

    No projection onto the conserved set is applied.  Integration is restarted
    at every crossing of the collar boundary ``d = eps`` so that no step
    straddles the point where the potential is only C^1.  If the path leaves
    the chart (only possible when the potential is off) the run stops with
    ``status = 'chart-exit'``.

    Long stretches use the compiled DOP853 behind ``scipy.integrate.ode``; the
    step that straddles a crossing is redone with ``solve_ivp`` events to
    locate it.
    """
    if not 0 < r0.theta < np.pi / 2:
        raise ChartDomainError("initial theta outside the chart")
    rhs = _rhs(m, V)
    # with the barrier on, the inner wall keeps theta away from the link
    level = V.epsilon if V.active else chart_margin

    def watch(y):
        return min(y[0], np.pi / 2 - y[0]) - level

    def event(_t, y):
        return watch(y)

    event.terminal = True
    y0 = r0.as_array()
    side = 1.0 if watch(y0) > 0 else -1.0
    grid = None if dt is None else np.arange(0.0, t_end + 0.5 * dt, dt)
    if grid is not None:
        grid = grid[(grid > 0) & (grid <= t_end)]
    targets = [t_end] if grid is None else list(grid)

    t0 = 0.0
    ts, ys = [0.0], [y0]
    crossings = []
    status = "ok"
    k = 0
    while k < len(targets):
        target = targets[k]
        st, sy, stopped = _leg(rhs, t0, y0, target, rtol, atol, watch, side)
        if not stopped:
            if grid is None:
                ts += st
                ys += sy
            else:
                ts.append(target)
                ys.append(sy[-1] if sy else y0)
            t0, y0 = target, (sy[-1] if sy else y0)
            k += 1
            continue
        # redo the straddling step from the last accepted state with event location
        t_last, y_last = (st[-2], sy[-2]) if len(st) > 1 else (t0, y0)
        if grid is None:
            ts += st[:-1]
            ys += sy[:-1]
        event.direction = -side
        sol = solve_ivp(rhs, (t_last, st[-1]), y_last, method="DOP853", rtol=rtol, atol=atol, events=event)
        t_stop = float(sol.t_events[0][0]) if len(sol.t_events[0]) else float(st[-1])
        if not V.active:
            status = "chart-exit"
            if grid is None and len(sol.t_events[0]):
                ts.append(t_stop)
                ys.append(sol.y_events[0][0])
            break
        if t_stop > t_last:
            land = solve_ivp(rhs, (t_last, t_stop), y_last, method="DOP853", rtol=rtol, atol=atol)
            y_cross = land.y[:, -1]
        else:
            y_cross = y_last
        crossings.append(t_stop)
        side = -side
        t0, y0 = t_stop, y_cross
        if grid is None:
            ts.append(t_stop)
            ys.append(y_cross)
    t = np.asarray(ts, dtype=float)
    y = np.asarray(ys, dtype=float).reshape(-1, 6)
    return Trajectory(t, y, status, "", {"collar": np.array(crossings)})


def theta_period_by_events(r0: ReducedState, m: MagneticParams, V: PotentialSpec, n_periods: int = 3,
                           t_max: float = 500.0) -> float:
    """Mean time between successive upward crossings of theta through its start value."""
    th0 = r0.theta
    # start slightly off a turning point so the crossing is transversal
    def ev(_t, y):
        return y[0] - th0

    ev.direction = 1 if r0.theta_dot >= 0 else -1
    sol = solve_ivp(_rhs(m, V), (0.0, t_max), r0.as_array(), method="DOP853",
                    rtol=1e-12, atol=1e-13, events=ev)
    times = sol.t_events[0]
    times = times[times > 1e-9]
    if len(times) < n_periods:
        raise NotLibrating("not enough crossings detected")
    return float(times[n_periods - 1] / n_periods)
