"""Exact piecewise-linear slope +-1 functions and the daughter-fold rule.

A ``FoldedPath`` is stored as its domain, the value and slope at the left
end, and the ordered interior turning points.  All coordinates are exact
rationals (``gmpy2.mpq``, which compares and hashes equal to
``fractions.Fraction`` and mixes with it) so that fold chains compare exactly.
"""

from __future__ import annotations

import numbers
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable

from gmpy2 import mpq

Rational = type(mpq())
ZERO = mpq(0)
ONE = mpq(1)


class DomainError(ValueError):
    """A point or interval lies outside a function's domain."""


class ClaspError(ValueError):
    """A clasp pair is not admissible for a mother domain."""


def as_fraction(x) -> Fraction:
    """Coerce ints, strings like ``"1/3"``, floats and Fractions to an exact mpq."""
    if isinstance(x, Rational):
        return x
    if isinstance(x, str):
        x = Fraction(x)
    if isinstance(x, numbers.Rational):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = as_fraction(self.lo), as_fraction(self.hi)
        if lo > hi:
            raise ValueError(f"interval with lo > hi: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def covers(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


@dataclass(frozen=True)
class ClaspChoice:
    a: Fraction
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", as_fraction(self.a))
        object.__setattr__(self, "b", as_fraction(self.b))

    def check(self, domain: Interval) -> None:
        if not (domain.lo <= self.a <= self.b <= domain.hi):
            raise ClaspError(
                f"clasp ({self.a}, {self.b}) not inside {domain} with a <= b"
            )

    def displacements(self, domain: Interval) -> tuple[Fraction, Fraction]:
        """Return (a - c, d - b)."""
        return self.a - domain.lo, domain.hi - self.b


@dataclass(frozen=True)
class FoldedPath:
    """PL map on ``domain`` with slopes alternating +-1 at each turn."""

    domain: Interval
    start_value: Fraction
    start_slope: int
    turns: tuple[Fraction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "start_value", as_fraction(self.start_value))
        object.__setattr__(self, "turns", tuple(self.turns))
        if self.start_slope not in (1, -1):
            raise ValueError("start_slope must be +1 or -1")

    def validate(self) -> None:
        """Raise ValueError unless every structural invariant holds."""
        lo, hi = self.domain.lo, self.domain.hi
        prev = lo
        for t in self.turns:
            if not (prev < t < hi):
                raise ValueError(f"turn {t} not strictly increasing inside {self.domain}")
            prev = t
        for v in self.knot_values:
            if not (ZERO <= v <= ONE):
                raise ValueError(f"value {v} outside [0, 1]")

    @cached_property
    def knots(self) -> tuple[Fraction, ...]:
        """Domain endpoints and turns, increasing."""
        return (self.domain.lo, *self.turns, self.domain.hi)

    @cached_property
    def knot_values(self) -> tuple[Fraction, ...]:
        xs = self.knots
        vals = [self.start_value]
        s = self.start_slope
        for i in range(1, len(xs)):
            vals.append(vals[-1] + s * (xs[i] - xs[i - 1]))
            s = -s
        return tuple(vals)

    @cached_property
    def image_interval(self) -> Interval:
        vs = self.knot_values
        return Interval(min(vs), max(vs))

    def slope_right_of(self, x: Fraction) -> int:
        """Slope on the segment immediately right of x (x < domain.hi)."""
        k = bisect_right(self.turns, x)
        return self.start_slope if k % 2 == 0 else -self.start_slope

    def slope_left_of(self, x: Fraction) -> int:
        """Slope on the segment immediately left of x (x > domain.lo)."""
        k = bisect_left(self.turns, x)
        return self.start_slope if k % 2 == 0 else -self.start_slope

    def __call__(self, x) -> Fraction:
        return evaluate(self, x)


def identity_path() -> FoldedPath:
    return FoldedPath(Interval(ZERO, ONE), ZERO, 1, ())


def evaluate(f: FoldedPath, x) -> Fraction:
    x = as_fraction(x)
    if not f.domain.contains(x):
        raise DomainError(f"{x} outside domain {f.domain}")
    xs, vs = f.knots, f.knot_values
    k = bisect_right(xs, x) - 1
    if k >= len(xs) - 1:
        return vs[-1]
    s = f.start_slope if k % 2 == 0 else -f.start_slope
    return vs[k] + s * (x - xs[k])


def image(f: FoldedPath) -> Interval:
    return f.image_interval


def diameter(f: FoldedPath) -> Fraction:
    return f.image_interval.length


def image_on(f: FoldedPath, iv: Interval) -> Interval:
    """Exact image of the restriction of f to iv."""
    if not f.domain.covers(iv):
        raise DomainError(f"{iv} not inside domain {f.domain}")
    lo_k = bisect_right(f.turns, iv.lo)
    hi_k = bisect_left(f.turns, iv.hi)
    vals = [evaluate(f, iv.lo), evaluate(f, iv.hi)]
    tv = f.knot_values
    vals.extend(tv[k + 1] for k in range(lo_k, hi_k))
    return Interval(min(vals), max(vals))


def _turns_between(turns: tuple[Fraction, ...], lo, hi) -> tuple[Fraction, ...]:
    """Turns strictly inside (lo, hi)."""
    return turns[bisect_right(turns, lo):bisect_left(turns, hi)]


def fold_daughters(f: FoldedPath, clasp: ClaspChoice) -> tuple[FoldedPath, FoldedPath]:
    """Return (f_sigma0, f_sigma1) for clasp points (a, b)."""
    dom = f.domain
    clasp.check(dom)
    c, d, a, b = dom.lo, dom.hi, clasp.a, clasp.b
    fa = evaluate(f, a)
    c2, d2 = 2 * c, 2 * d

    # child0 on [2c-a, b]: reflected copy of f|[c,a] then f|[c,b]
    inner = _turns_between(f.turns, c, a)
    if a > c:
        reflected = tuple(c2 - t for t in reversed(inner))
        fold = (c,) if b > c else ()
        turns0 = reflected + fold + _turns_between(f.turns, c, b)
        slope0 = -f.slope_left_of(a)
    else:
        turns0 = _turns_between(f.turns, c, b)
        slope0 = f.start_slope
    child0 = FoldedPath(Interval(c2 - a, b), fa, slope0, turns0)

    # child1 on [a, 2d-b]: f|[a,d] then reflected copy of f|[b,d]
    outer = _turns_between(f.turns, b, d)
    forward = _turns_between(f.turns, a, d)
    if b < d:
        fold = (d,) if a < d else ()
        turns1 = forward + fold + tuple(d2 - t for t in reversed(outer))
    else:
        turns1 = forward
    if a < d:
        slope1 = f.slope_right_of(a)
    else:
        # a = b = d: start segment is the reflection of f just left of d
        slope1 = -f.slope_left_of(d) if d > c else f.start_slope
    child1 = FoldedPath(Interval(a, d2 - b), fa, slope1, turns1)
    return child0, child1


def derive_clasp(mother_domain: Interval, child0_domain: Interval) -> ClaspChoice:
    c = mother_domain.lo
    a = 2 * c - child0_domain.lo
    b = child0_domain.hi
    if not (child0_domain.lo <= c <= a <= b <= mother_domain.hi):
        raise ClaspError(f"{child0_domain} is not a child-0 domain of {mother_domain}")
    return ClaspChoice(a, b)


def equal_on(f: FoldedPath, g: FoldedPath, iv: Interval) -> bool:
    """Exact comparison of f and g restricted to iv."""
    if not f.domain.covers(iv) or not g.domain.covers(iv):
        raise DomainError(f"{iv} not inside both domains {f.domain}, {g.domain}")
    if evaluate(f, iv.lo) != evaluate(g, iv.lo):
        return False
    if iv.lo == iv.hi:
        return True
    if f.slope_right_of(iv.lo) != g.slope_right_of(iv.lo):
        return False
    return _turns_between(f.turns, iv.lo, iv.hi) == _turns_between(g.turns, iv.lo, iv.hi)


def sample_points(f: FoldedPath) -> list[tuple[Fraction, Fraction]]:
    """Knots with values, suitable for drawing the graph as a polyline."""
    return list(zip(f.knots, f.knot_values))


def from_knots(points: Iterable[tuple[Fraction, Fraction]]) -> FoldedPath:
    """Build a FoldedPath from (x, value) knots, dropping non-turning knots."""
    pts = [(as_fraction(x), as_fraction(v)) for x, v in points]
    if len(pts) < 2:
        x, v = pts[0]
        return FoldedPath(Interval(x, x), v, 1, ())
    slopes = []
    for (x0, v0), (x1, v1) in zip(pts, pts[1:]):
        if x1 <= x0 or abs(v1 - v0) != x1 - x0:
            raise ValueError("knots must be increasing with slope +-1 segments")
        slopes.append(1 if v1 > v0 else -1)
    turns = tuple(pts[i + 1][0] for i in range(len(slopes) - 1) if slopes[i] != slopes[i + 1])
    return FoldedPath(Interval(pts[0][0], pts[-1][0]), pts[0][1], slopes[0], turns)
