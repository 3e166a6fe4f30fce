"""Plane machinery for the small-displacement shrink.

A domain interval [c, d] is the plane point (c, d); its length is y - x.
Interval inclusion [c', d'] contains [c, d] is the NW-quadrant relation.
Steps move along tangents of concentric circles around a distant center,
so radii grow by r^2 -> r^2 + h^2.  Floats (binary64) throughout.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from fractions import Fraction

from .plfun import Interval

SQRT_HALF = math.sqrt(0.5)
CENTER_START_FACTOR = 10.0
CENTER_MAX_DOUBLINGS = 60
# relative slack kept below the length bound by select_center
CENTER_SAFETY = 1e-9


class InfeasibleCenter(ValueError):
    pass


class OrientationError(ValueError):
    pass


class DivergenceError(ValueError):
    pass


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float

    @property
    def length(self) -> float:
        return self.y - self.x


@dataclass(frozen=True)
class Bullseye:
    """Concentric circles about ``center``; the current radius follows the steps taken."""

    center: PlanePoint
    base_radius: float
    n_steps: int = 0
    sum_sq: float = 0.0

    @property
    def radius(self) -> float:
        return math.sqrt(self.base_radius * self.base_radius + self.sum_sq)

    def advanced(self, h: float) -> "Bullseye":
        return Bullseye(self.center, self.base_radius, self.n_steps + 1, self.sum_sq + h * h)


@dataclass(frozen=True)
class EpsSchedule:
    """Per-depth displacement budgets eps_1, eps_2, ...

    kind is "constant" (eps0), "power" (K * i**-p) or "explicit" (terms, the
    last one repeating forever).
    """

    kind: str = "constant"
    eps0: float = 0.05
    K: float = 0.0
    p: float = 0.0
    terms: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind == "constant":
            if not self.eps0 > 0:
                raise ValueError("constant schedule needs eps0 > 0")
        elif self.kind == "power":
            if not (self.K > 0 and self.p >= 0):
                raise ValueError("power schedule needs K > 0 and p >= 0")
        elif self.kind == "explicit":
            if not self.terms or any(not t > 0 for t in self.terms):
                raise ValueError("explicit schedule needs positive terms")
            object.__setattr__(self, "terms", tuple(float(t) for t in self.terms))
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, eps0: float) -> "EpsSchedule":
        return cls("constant", eps0=float(eps0))

    @classmethod
    def power(cls, K: float, p: float) -> "EpsSchedule":
        return cls("power", K=float(K), p=float(p))

    @classmethod
    def explicit(cls, terms) -> "EpsSchedule":
        return cls("explicit", terms=tuple(terms))

    @classmethod
    def parse(cls, text: str) -> "EpsSchedule":
        """Parse "constant 0.05", "power K=0.1 p=0.5" or "explicit 0.1, 0.05"."""
        parts = text.strip().split(None, 1)
        if not parts:
            raise ValueError("empty schedule")
        kind, rest = parts[0], (parts[1] if len(parts) > 1 else "")
        if kind == "constant":
            return cls.constant(float(rest))
        if kind == "power":
            kv = dict(tok.split("=", 1) for tok in rest.replace(",", " ").split())
            unknown = set(kv) - {"K", "p"}
            if unknown:
                raise ValueError(f"unknown power schedule parameter(s) {sorted(unknown)}")
            return cls.power(float(kv["K"]), float(kv["p"]))
        if kind == "explicit":
            return cls.explicit(float(t) for t in rest.replace(",", " ").split())
        raise ValueError(f"unknown schedule kind {kind!r}")

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant {self.eps0!r}"
        if self.kind == "power":
            return f"power K={self.K!r} p={self.p!r}"
        return "explicit " + ", ".join(repr(t) for t in self.terms)

    def term(self, i: int) -> float:
        if i < 1:
            raise IndexError("schedule terms are indexed from 1")
        if self.kind == "constant":
            return self.eps0
        if self.kind == "power":
            return self.K * float(i) ** (-self.p)
        return self.terms[min(i, len(self.terms)) - 1]

    def diverges(self) -> bool:
        """Whether sum eps_i^2 diverges (decided from the kind, not numerically)."""
        if self.kind == "power":
            return 2 * self.p <= 1
        return True  # constants and repeated explicit tails

    def kernel_params(self):
        """(kind code, p0, p1, terms) in the form the compiled engine expects."""
        import numpy as np

        if self.kind == "constant":
            return 0, self.eps0, 0.0, np.zeros(1)
        if self.kind == "power":
            return 1, self.K, self.p, np.zeros(1)
        return 2, 0.0, 0.0, np.array(self.terms, dtype=np.float64)


def _f(x) -> float:
    return float(x) if not isinstance(x, float) else x


def to_plane(iv: Interval) -> PlanePoint:
    return PlanePoint(_f(iv.lo), _f(iv.hi))


def nw_contains(p: PlanePoint, q: PlanePoint) -> bool:
    """True iff p lies in the closed NW quadrant of q."""
    return p.x <= q.x and p.y >= q.y


def middle_third_point(c_tau, t):
    """(c + (t-c)/3, c + 2(t-c)/3); exact when given Fractions."""
    if not t > c_tau:
        raise ValueError("middle_third_point needs t > c")
    if isinstance(c_tau, numbers.Rational) and isinstance(t, numbers.Rational):
        c_tau, t = Fraction(c_tau), Fraction(t)
    L = t - c_tau
    return PlanePoint(c_tau + L / 3, c_tau + 2 * L / 3)


def arc_sup_length(center: PlanePoint, p: PlanePoint, X: float, Y: float) -> float:
    """Sup of y - x over the arc through p (about center) inside {x <= X, y >= Y}.

    The arc is the connected component containing p; its sup is attained at an
    end (a crossing of x = X or y = Y) or at the circle's (-1, 1) extreme point.
    """
    ox, oy = center.x, center.y
    r = math.hypot(p.x - ox, p.y - oy)
    theta_p = math.atan2(p.y - oy, p.x - ox)
    two_pi = 2.0 * math.pi
    crossings = []
    dx = X - ox
    if abs(dx) <= r:
        s = math.sqrt(r * r - dx * dx)
        crossings += [(X, oy + s), (X, oy - s)]
    dy = Y - oy
    if abs(dy) <= r:
        s = math.sqrt(r * r - dy * dy)
        crossings += [(ox + s, Y), (ox - s, Y)]
    extreme = oy - ox + r * math.sqrt(2.0)
    if not crossings:
        return extreme
    ccw = cw = None  # (angle offset, point)
    for cx, cy in crossings:
        delta = (math.atan2(cy - oy, cx - ox) - theta_p) % two_pi
        if delta <= 0.0:
            delta = two_pi
        if ccw is None or delta < ccw[0]:
            ccw = (delta, (cx, cy))
        if cw is None or delta > cw[0]:
            cw = (delta, (cx, cy))
    best = max(ccw[1][1] - ccw[1][0], cw[1][1] - cw[1][0], p.y - p.x)
    # the (-1, 1) extreme sits at angle 3pi/4; inside the arc iff its offset is
    # below the ccw end or above the cw end
    de = (0.75 * math.pi - theta_p) % two_pi
    if de <= ccw[0] or de >= cw[0]:
        best = max(best, extreme)
    return best


def center_ok(center: PlanePoint, p: PlanePoint, q: PlanePoint, length_bound: float, max_step: float) -> bool:
    if not (center.x < p.x and center.y > p.y):
        return False
    sup = arc_sup_length(center, p, q.x + max_step, q.y - max_step)
    return sup < length_bound * (1.0 - CENTER_SAFETY)


def select_center(p: PlanePoint, q: PlanePoint, length_bound: float, max_step: float) -> PlanePoint:
    """A center on the ray q + s(-1, 1)/sqrt2 meeting the length certificate."""
    if not nw_contains(p, q):
        raise InfeasibleCenter(f"{p} is not in the NW quadrant of {q}")
    if not p.length < length_bound:
        raise InfeasibleCenter(f"point length {p.length} already >= {length_bound}")
    s = CENTER_START_FACTOR * max(p.length, max_step)
    for _ in range(CENTER_MAX_DOUBLINGS + 1):
        center = PlanePoint(q.x - s * SQRT_HALF, q.y + s * SQRT_HALF)
        if center_ok(center, p, q, length_bound, max_step):
            return center
        s *= 2.0
    raise InfeasibleCenter(f"no center found for p={p}, q={q} within {CENTER_MAX_DOUBLINGS} doublings")


def tangent_step(center: PlanePoint, p: PlanePoint, h: float) -> tuple[PlanePoint, PlanePoint]:
    """(child0 point, child1 point) = (p - h t, p + h t) for the unit tangent t."""
    if not (center.x < p.x and center.y > p.y):
        raise OrientationError(f"center {center} is not strictly NW of {p}")
    if not h > 0:
        raise ValueError("step length must be positive")
    vx, vy = p.x - center.x, p.y - center.y
    n = math.hypot(vx, vy)
    tx, ty = -vy / n, vx / n
    return PlanePoint(p.x - h * tx, p.y - h * ty), PlanePoint(p.x + h * tx, p.y + h * ty)


def radius_after(r0: float, steps) -> float:
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    return math.sqrt(r0 * r0 + math.fsum(h * h for h in steps))


STEPS_CAP = 10**8


def steps_to_radius(r0: float, sched: EpsSchedule, target: float, start: int = 1, cap: int = STEPS_CAP) -> int:
    """Least k with r0^2 + eps_start^2 + ... + eps_{start+k-1}^2 >= target^2."""
    if not target > r0:
        raise ValueError("target must exceed r0")
    need = target * target - r0 * r0
    if sched.kind == "constant":
        return math.ceil(need / (sched.eps0 * sched.eps0))
    if not sched.diverges():
        # sum_{i>=1} K^2 i^-2p is at most K^2 (1 + 1/(2p - 1))
        total = sched.K**2 * (1.0 + 1.0 / (2 * sched.p - 1))
        if total < need:
            raise DivergenceError("schedule square sum converges below the target")
    acc = 0.0
    i = start
    for k in range(1, cap + 1):
        e = sched.term(i)
        acc += e * e
        if acc >= need:
            return k
        i += 1
    raise DivergenceError(f"target radius not reached within {cap} steps")
