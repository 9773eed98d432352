"""Admissible-Hamiltonian pipeline for the capacity lower bound.

``H = f(h(E + V))``: the profile ``h`` rescales time energy-level-wise so that
the periods of the billiard dynamics become roughly one, and ``f`` adds the
plateaus and slope margin required of an admissible Hamiltonian.  Periods are
only ever rescaled, never re-integrated: an orbit of ``E + V`` at energy ``y``
with period ``T`` has period ``T / (h'(y) f'(h(y)))`` under ``H``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import InvalidParameter
from .flow import solve_closed_form
from .geometry import MagneticParams, check_odd
from .lens import CensusRecord, LensSpace, lens_short_orbit_scan, zp_symmetric_bounce_scan

TWO_PI = 2 * np.pi


def _check_eps(epsilon: float):
    if not (0 <= epsilon < 0.5):
        raise InvalidParameter(f"epsilon must lie in [0, 1/2), got {epsilon!r}")


def h_eps(y, epsilon: float):
    """Piecewise profile: linear below eps/2, 2 pi sqrt(2y) above (vectorised)."""
    _check_eps(epsilon)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise InvalidParameter("y must be >= 0")
    if epsilon == 0:
        out = TWO_PI * np.sqrt(2 * y)
    else:
        r = math.sqrt(epsilon)
        out = np.where(y <= epsilon / 2, TWO_PI * (y / r + r / 2), TWO_PI * np.sqrt(2 * np.maximum(y, epsilon / 2)))
    return out if out.ndim else float(out)


def h_eps_prime(y, epsilon: float):
    _check_eps(epsilon)
    y = np.asarray(y, dtype=float)
    if epsilon == 0:
        with np.errstate(divide="ignore"):
            out = TWO_PI / np.sqrt(2 * y)
    else:
        out = np.where(y <= epsilon / 2, TWO_PI / math.sqrt(epsilon),
                       TWO_PI / np.sqrt(2 * np.maximum(y, epsilon / 2)))
    return out if out.ndim else float(out)


def _smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class ReparamProfile:
    """h_eps, optionally with its junction blended over ``[eps/2 - w, eps/2 + w]``."""

    epsilon: float
    smooth_width: float = 0.0

    def __post_init__(self):
        _check_eps(self.epsilon)
        if self.smooth_width < 0 or self.smooth_width >= self.epsilon / 2 and self.smooth_width > 0:
            raise InvalidParameter("smooth_width must be in [0, eps/2)")

    def _branches(self, y):
        r = math.sqrt(self.epsilon)
        lin = TWO_PI * (y / r + r / 2)
        sq = TWO_PI * np.sqrt(2 * np.maximum(y, 0.0))
        return lin, sq

    def h(self, y):
        if self.smooth_width == 0:
            return h_eps(y, self.epsilon)
        y = np.asarray(y, dtype=float)
        w, y0 = self.smooth_width, self.epsilon / 2
        S = _smoothstep((y - y0 + w) / (2 * w))
        lin, sq = self._branches(y)
        return (1 - S) * lin + S * sq

    def dh(self, y):
        if self.smooth_width == 0:
            return h_eps_prime(y, self.epsilon)
        y = np.asarray(y, dtype=float)
        d = 1e-7 * max(self.smooth_width, 1e-3)
        return (self.h(y + d) - self.h(y - d)) / (2 * d)

    @property
    def minimum(self) -> float:
        return float(self.h(0.0))

    def top(self, radius: float) -> float:
        """Value of h at the rim |v| = radius of the disk bundle."""
        return float(self.h(radius ** 2 / 2))


def reparam_period(T_base: float, y: float, epsilon: float, f_prime: float = 1.0) -> float:
    """Period under f(h(E + V)) of an orbit of E + V with period T_base at energy y."""
    rate = h_eps_prime(y, epsilon) * f_prime
    if rate <= 0:
        return math.inf
    return T_base / rate


@dataclass(frozen=True)
class AdmissibilityProfile:
    """f: flat on [a, a + w], rising with slope up to s_max, flat on [b - w, b]."""

    a: float
    b: float
    margin: float
    s_max: float

    @property
    def oscillation(self) -> float:
        # middle of length b - a - 4w at full slope, two transitions of mean slope s_max/2
        return self.s_max * (self.b - self.a - 3 * self.margin)

    def df(self, u):
        u = np.asarray(u, dtype=float)
        a, b, w = self.a, self.b, self.margin
        up = _smoothstep((u - a - w) / w)
        down = 1.0 - _smoothstep((u - b + 2 * w) / w)
        return self.s_max * up * down

    def f(self, u):
        """Exact up to quadrature inside the two transition layers."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        a, b, w, s = self.a, self.b, self.margin, self.s_max
        out = np.empty_like(u)
        for i, x in enumerate(u):
            if x <= a + w:
                out[i] = 0.0
            elif x <= a + 2 * w:
                out[i] = s * w * quad(_smoothstep, 0.0, (x - a - w) / w, epsabs=1e-15)[0]
            elif x <= b - 2 * w:
                out[i] = s * (w / 2 + x - a - 2 * w)
            elif x <= b - w:
                t = (x - b + 2 * w) / w
                out[i] = s * (w / 2 + b - a - 4 * w) + s * w * (t - quad(_smoothstep, 0.0, t, epsabs=1e-15)[0])
            else:
                out[i] = self.oscillation
        return float(out[0]) if scalar else out


def build_admissible(epsilon: float, margin: float | None = None, a: float | None = None,
                     b: float | None = None) -> AdmissibilityProfile:
    """Admissibility profile on the range [a, b] of h_eps over D_{1-2 eps}.

    Defaults: a = h(0) = pi sqrt(eps), b = 2 pi (1 - 2 eps), margin = max(eps/5, 1e-3).
    """
    _check_eps(epsilon)
    prof = ReparamProfile(epsilon)
    if a is None:
        a = prof.minimum
    if b is None:
        b = prof.top(1 - 2 * epsilon)
    if margin is None:
        margin = max(epsilon / 5, 1e-3)
    if not (0 < margin < 1 / 3):
        raise InvalidParameter(f"margin must be in (0, 1/3), got {margin!r}")
    if b - a - 4 * margin <= 0:
        raise InvalidParameter("plateaus and transition layers overlap")
    return AdmissibilityProfile(float(a), float(b), float(margin), 1 - 3 * margin)


@dataclass
class CapacityEstimate:
    epsilon: float
    p: int
    oscillation: float
    min_period_found: float
    reference_upper: float = TWO_PI
    witness: dict | None = None
    n_orbits: int = 0
    budget: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.min_period_found > 1 and self.oscillation <= self.reference_upper

    def verdict(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag}: lower >= {self.oscillation:.10g}, reference upper = 2pi "
                f"(certified over budget {self.budget}; min reparametrised period {self.min_period_found:.6g})")

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "p": self.p, "oscillation": self.oscillation,
                "min_period_found": self.min_period_found, "reference_upper": self.reference_upper,
                "pass": self.passed, "witness": self.witness, "n_orbits": self.n_orbits,
                "budget": self.budget, "notes": self.notes}


def clocked_period(rec: CensusRecord, prof: ReparamProfile, f: AdmissibilityProfile) -> float:
    """Period of a census orbit under f(h(E + V)); inf where f is flat."""
    y = 0.5 * rec.c ** 2
    if y > 0.5 * (1 - 2 * rec.epsilon) ** 2 * (1 + 1e-12):
        return math.inf  # outside the disk bundle D_{1 - 2 eps}
    u = float(prof.h(y))
    fp = float(f.df(u))
    if fp <= 0:
        return math.inf
    return rec.period / (float(prof.dh(y)) * fp)


def link_clearance(rec: CensusRecord) -> float:
    """Smallest distance to the Hopf link along a magnetic-geodesic record.

    Uses |z1(s)|^2 = A + B cos(omega s + phi0) along the closed form.
    """
    orb = solve_closed_form(rec.tangent(), MagneticParams(rec.epsilon))
    a1, b1 = abs(orb.p_plus[0]), abs(orb.p_minus[0])
    lo, hi = (a1 - b1) ** 2, (a1 + b1) ** 2
    return float(min(np.arcsin(np.sqrt(np.clip(lo, 0, 1))), np.arccos(np.sqrt(np.clip(hi, 0, 1)))))


def certify_lower_bound(L: LensSpace, epsilon: float, search_budget: int = 20000, seed: int = 0,
                        margin: float | None = None, include_plain: bool = True,
                        bounce_fraction: float = 0.02, speeds=None) -> CapacityEstimate:
    """Build f(h(E + V)) and search for periodic orbits of reparametrised period <= 1.

    The search covers closed magnetic geodesics on L(p;1) and periodic bounce
    orbits of the ideal billiard (walls at distance eps from the Hopf link).
    ``include_plain`` also admits bounce orbits that close on S^3 without a
    deck shift; they are periodic on the quotient as well.
    Magnetic geodesics that enter the eps-caps around the Hopf link are not
    orbits of E + V_eps and are discarded.
    The result is certified only over the sampled budget.
    """
    check_odd(L.p)
    _check_eps(epsilon)
    m = MagneticParams(epsilon)
    prof = ReparamProfile(epsilon)
    f = build_admissible(epsilon, margin)
    if speeds is None:
        rim = 1 - 2 * epsilon
        speeds = tuple(sorted({rim, 0.6 * rim, max(math.sqrt(epsilon), 0.05) * 1.05}, reverse=True))
    n_bounce = int(round(search_budget * bounce_fraction)) if epsilon > 0 else 0
    n_geo = search_budget - n_bounce
    records = lens_short_orbit_scan(L, m, n_seeds=n_geo, seed=seed, speeds=speeds)
    n_scanned = len(records)
    # orbits of E + V_eps must avoid the walls; geodesics through the caps do not survive
    if epsilon > 0:
        records = [r for r in records if link_clearance(r) > epsilon]
    n_dropped = n_scanned - len(records)
    if n_bounce:
        per = max(n_bounce // len(speeds), 1)
        for i, c in enumerate(speeds):
            records += zp_symmetric_bounce_scan(L, m, epsilon, n_seeds=per, seed=seed + 1 + i,
                                                include_plain=include_plain, speed=c)
    best, witness = math.inf, None
    for rec in records:
        T = clocked_period(rec, prof, f)
        if T < best:
            best, witness = T, rec
    est = CapacityEstimate(
        epsilon=epsilon, p=L.p, oscillation=f.oscillation, min_period_found=best,
        witness=None if witness is None else {**witness.to_dict(), "clocked_period": best},
        n_orbits=len(records), budget=search_budget,
        notes={"f": {"a": f.a, "b": f.b, "margin": f.margin, "s_max": f.s_max},
               "speeds": list(speeds), "include_plain": include_plain,
               "geodesics_through_caps": n_dropped,
               "scope": "certified over the sampled budget only"},
    )
    return est
