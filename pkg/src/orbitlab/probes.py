"""Two explicit orbit families of E + V_eps that are faster than one unit of clocked time.

Both live in the reduced system with the barrier potential and survive any
barrier that rises continuously from zero at the collar edge.

* chord orbits: theta librates between the two caps while the net advance of
  phi1 and phi2 over one libration is zero, so the orbit closes after a single
  libration.  At the rim energy its period tends to pi as eps -> 0.
* collar relative equilibria: theta stays fixed inside the collar and
  phi1' = -phi2' = omega, i.e. the curve (e^{i w t} z1, e^{-i w t} z2).  This is
  a deck-group orbit, so it closes on L(p;1) after time 2 pi / (p |w|).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, fsolve

from .geometry import MagneticParams
from .reduced import (
    PotentialSpec,
    ReducedState,
    conserved_set,
    _rhs,
    integrate,
    phase_advance,
    potential_derivative,
    quadrature_period,
    reduced_params,
)


@dataclass(frozen=True)
class ProbeOrbit:
    epsilon: float
    state: ReducedState
    speed: float
    period: float
    defect: float
    p: int = 1
    bracket: float = math.nan  # width of a sign-changing float bracket around the exact root

    @property
    def scaled_period(self) -> float:
        """Period times speed over 2 pi, the clocked period on the sqrt branch of h."""
        return self.period * self.speed / (2 * np.pi)


def _wrapped(d: np.ndarray) -> np.ndarray:
    d = d.copy()
    d[1:3] = (d[1:3] + np.pi) % (2 * np.pi) - np.pi
    return d


def chord_orbit(epsilon: float, speed: float = 1.0, theta0: float = np.pi / 4) -> ProbeOrbit:
    """Libration through theta0 with zero net phase advance (found by fsolve)."""
    m = reduced_params(MagneticParams(epsilon))
    V = PotentialSpec(epsilon)
    s, c = math.sin(theta0), math.cos(theta0)

    def state(u):
        rest = speed ** 2 - (s * u[0]) ** 2 - (c * u[1]) ** 2
        return ReducedState(theta0, 0.0, 0.0, math.sqrt(max(rest, 0.0)), u[0], u[1])

    def resid(u):
        return list(phase_advance(conserved_set(state(u), m, V), m, V, theta0))

    u = fsolve(resid, [0.0, 0.0], xtol=1e-12)
    r = state(u)
    T = quadrature_period(conserved_set(r, m, V), m, V, theta0)
    tr = integrate(r, m, V, T)
    defect = float(np.abs(_wrapped(tr.y[-1] - r.as_array())).max())
    return ProbeOrbit(epsilon, r, speed, T, defect)


def collar_equilibrium(epsilon: float, p: int, speed: float = 1.0, phases=(0.3, 1.1)) -> ProbeOrbit | None:
    """Relative equilibrium in the collar next to gamma_- (theta near pi/2).

    ``defect`` is the largest second derivative of (theta, phi1, phi2) at the
    float state; it is limited by the steepness of the barrier.  ``bracket`` is
    the width of a two-ulp interval on which theta'' changes sign, so an exact
    equilibrium lies inside it.

    Returns None when the root sits closer to the collar edge than float
    resolution allows.
    """
    m = reduced_params(MagneticParams(epsilon))
    V = PotentialSpec(epsilon)
    er = m.epsilon
    edge = np.pi / 2 - epsilon
    inner = np.pi / 2 - V.inner_wall
    best = None
    for om in (speed, -speed):
        def g(th, om=om):
            return 4 * er * math.sin(th) * math.cos(th) * om - potential_derivative(V, th)

        lo = np.nextafter(edge, np.pi)
        hi = min(edge + 0.5 * epsilon ** 4, np.nextafter(inner, 0.0))
        if not (lo < hi) or g(lo) * g(hi) >= 0:
            continue
        th = brentq(g, lo, hi, xtol=1e-300)
        r = ReducedState(th, phases[0], phases[1], 0.0, om, -om)
        # theta is exactly stationary, so the motion is the deck rotation itself;
        # the barrier is far too stiff here for step-by-step integration to add anything
        acc = _rhs(m, V)(0.0, r.as_array())
        a, b = np.nextafter(th, 0.0), np.nextafter(th, np.pi)
        width = b - a if g(a) * g(b) <= 0 else math.nan
        cand = ProbeOrbit(epsilon, r, speed, 2 * np.pi / (p * speed), float(np.abs(acc[3:]).max()), p, width)
        if best is None or cand.bracket < best.bracket or math.isnan(best.bracket):
            best = cand
    return best
