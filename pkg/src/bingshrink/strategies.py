"""Clasp-choice policies.

Each strategy object exposes the same small protocol used by the tree engine:

* ``root_state()`` -- bookkeeping attached to the root node;
* ``children(node, depth)`` -- ``(clasp, state0, state1)`` for an unexpanded node;
* ``extremal_key(node)`` -- larger means "further from shrinking"; the extremal
  engine follows the child with the larger key (ties go to child 0);
* ``done(node)`` -- whether the branch has finished its requested work;
* ``phase_info(node)`` -- ``(phase, eps_phase)`` for reports, or ``(None, None)``.

Strategy state is immutable and per branch, so subtrees can be expanded in
any order or in parallel with identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Union

from . import _core
from .geometry import Bullseye, EpsSchedule, PlanePoint, select_center
from .plfun import ClaspChoice, ClaspError, FoldedPath, diameter, image

GRID = 1 << _core.GRID_BITS


# -- configs -----------------------------------------------------------------

@dataclass(frozen=True)
class SmallDisplacement:
    eps_L: float = 0.25
    schedule: EpsSchedule = field(default_factory=lambda: EpsSchedule.constant(0.05))
    initial_eps: float = 0.05

    def __post_init__(self):
        if not self.eps_L > 0:
            raise ValueError("eps_L must be > 0")
        if not self.initial_eps > 0:
            raise ValueError("initial_eps must be > 0")
        if not self.schedule.diverges():
            raise ValueError("schedule must have a divergent square sum")


@dataclass(frozen=True)
class Bing1952:
    plane_count: int = 10
    goal_sequence: tuple[Fraction, ...] = ()

    def __post_init__(self):
        if self.plane_count < 3:
            raise ValueError("plane_count must be >= 3")
        goals = tuple(Fraction(g) for g in self.goal_sequence) or tuple(
            Fraction(2, self.plane_count**k) for k in (1, 2, 3)
        )
        if any(g <= 0 for g in goals) or any(g2 >= g1 for g1, g2 in zip(goals, goals[1:])):
            raise ValueError("goal_sequence must be positive and strictly decreasing")
        object.__setattr__(self, "goal_sequence", goals)


@dataclass(frozen=True)
class Bing1988:
    patient_delta: Fraction = Fraction(1, 100)

    def __post_init__(self):
        object.__setattr__(self, "patient_delta", Fraction(self.patient_delta))
        if not self.patient_delta > 0:
            raise ValueError("patient_delta must be > 0")


@dataclass(frozen=True)
class RandomClasps:
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


StrategyConfig = Union[SmallDisplacement, Bing1952, Bing1988, RandomClasps]


# -- grid helpers --------------------------------------------------------------

def to_grid(x: Fraction) -> int:
    n = x * GRID
    if n.denominator != 1:
        raise ValueError(f"{x} is not on the 2^-{_core.GRID_BITS} grid")
    return n.numerator


def from_grid(n: int) -> Fraction:
    return Fraction(n, GRID)


# -- small displacement --------------------------------------------------------

@dataclass(frozen=True)
class RoundState:
    """One bullseye round: retrace A = [lo, lo + L] on grid, its middle-third point q."""

    lo: int
    L: int
    bullseye: Bullseye
    M: int
    m: int
    index: int
    start_depth: int

    def q_point(self) -> PlanePoint:
        q3x, q3y = 3 * self.lo + self.L, 3 * self.lo + 2 * self.L
        return PlanePoint(float(Fraction(q3x, 3 * GRID)), float(Fraction(q3y, 3 * GRID)))

    def inside(self, x: int, y: int) -> bool:
        """Exact NW-quadrant test against q."""
        return 3 * x <= 3 * self.lo + self.L and 3 * y >= 3 * self.lo + 2 * self.L


@dataclass(frozen=True)
class StopRecord:
    round_index: int
    old_length: int
    new_length: int
    exit: str  # "c" or "d"
    side: str  # wiggle side of the next round


@dataclass(frozen=True)
class PhaseState:
    eps_phase: float
    retrace_boundary: int  # grid t
    wiggle_side: str  # "high": retrace [c, t]; "low": retrace [t, d]
    phase_index: int
    round: Optional[RoundState] = None
    rounds_started: int = 0
    stop: Optional[StopRecord] = None
    # (phase_index, eps) of phases that ended at this node
    phases_ended: tuple[tuple[int, float], ...] = ()

    @property
    def bullseye(self) -> Optional[Bullseye]:
        return self.round.bullseye if self.round else None

    def retrace(self, c: int, d: int) -> tuple[int, int]:
        if self.wiggle_side == "high":
            return c, max(self.retrace_boundary, c)
        return min(self.retrace_boundary, d), d


def small_disp_stop_check(state: PhaseState, x: int, y: int) -> tuple[str, PhaseState]:
    """Classify a freshly created plane point (grid ints) against the round's q.

    Returns ("continue", state), ("new_round", state) or ("phase_done", state).
    After a c-side exit the next retrace is [c', min(m, t)] (high wiggle kept,
    or flipped to high from low); after a d-side exit it is [max(M, t), d']
    (low wiggle), where M, m are the max/min clasp points since the round began.
    """
    rnd = state.round
    if rnd.inside(x, y):
        return "continue", state
    high = 1 if state.wiggle_side == "high" else 0
    nh, t, new_len, eps, phase, n_ended, c_exit = _core.stop_eval(
        high, state.retrace_boundary, rnd.M, rnd.m, rnd.lo, rnd.L, x, y,
        state.eps_phase, state.phase_index,
    )
    side = "high" if nh else "low"
    stop = StopRecord(rnd.index, rnd.L, new_len, "c" if c_exit else "d",
                      "high" if c_exit else "low")
    ended = tuple((state.phase_index + k, state.eps_phase / 2**k) for k in range(n_ended))
    new = PhaseState(eps, t, side, phase, None, state.rounds_started, stop, ended)
    return ("phase_done" if ended else "new_round"), new


def small_disp_start_round(state: PhaseState, c: int, d: int, depth: int, eps_L: float) -> PhaseState:
    lo, hi = state.retrace(c, d)
    L = hi - lo
    rnd = RoundState(lo, L, None, c, d, state.rounds_started, depth)  # type: ignore[arg-type]
    p = PlanePoint(c * _core.INV_SCALE, d * _core.INV_SCALE)
    center = select_center(p, rnd.q_point(), 1.0 + eps_L, _core.STEP_FACTOR * state.eps_phase)
    r0 = math.hypot(p.x - center.x, p.y - center.y)
    rnd = replace(rnd, bullseye=Bullseye(center, r0))
    return replace(state, round=rnd, rounds_started=state.rounds_started + 1, stop=None, phases_ended=())


def small_disp_children(node, state: PhaseState, depth: int, cfg: SmallDisplacement):
    """Clasp and child states for one tangent step at ``node`` (depth ``depth``)."""
    dom = node.path.domain
    c, d = to_grid(dom.lo), to_grid(dom.hi)
    if state.round is None:
        state = small_disp_start_round(state, c, d, depth, cfg.eps_L)
    rnd = state.round
    eps_i = cfg.schedule.term(depth + 1)
    h = _core.step_length(state.eps_phase, eps_i, d - c)
    o = rnd.bullseye.center
    da, db = _core.tangent_disp(c, d, o.x, o.y, h)
    a, b = c + da, d - db
    if a > b:
        raise ClaspError("tangent step too large for the domain")
    rnd = replace(rnd, bullseye=rnd.bullseye.advanced(h), M=max(rnd.M, a), m=min(rnd.m, b))
    base = replace(state, round=rnd, stop=None, phases_ended=())
    _, s0 = small_disp_stop_check(base, 2 * c - a, b)
    _, s1 = small_disp_stop_check(base, a, 2 * d - b)
    return ClaspChoice(from_grid(a), from_grid(b)), s0, s1


class SmallDisplacementStrategy:
    name = "small_displacement"
    interpretive = False

    def __init__(self, cfg: SmallDisplacement, stop_after_phases: Optional[int] = None):
        self.cfg = cfg
        self.stop_after_phases = stop_after_phases

    def root_state(self) -> PhaseState:
        return PhaseState(self.cfg.initial_eps, GRID, "high", 1)

    def children(self, node, depth):
        return small_disp_children(node, node.state, depth, self.cfg)

    def extremal_key(self, node):
        st: PhaseState = node.state
        dom = node.path.domain
        c, d = to_grid(dom.lo), to_grid(dom.hi)
        if st.round is not None:
            length = st.round.L
        else:
            lo, hi = st.retrace(c, d)
            length = hi - lo
        return (-st.phase_index, length)

    def done(self, node) -> bool:
        n = self.stop_after_phases
        return n is not None and node.state.phase_index > n

    def phase_info(self, node):
        return node.state.phase_index, node.state.eps_phase


# -- Bing 1952 ---------------------------------------------------------------

def _trim_points(f: FoldedPath, top: Fraction, bottom: Fraction) -> tuple[Fraction, Fraction]:
    """b = largest x with max f|[c,x] <= top; a = smallest x with min f|[x,d] >= bottom."""
    xs, vs = f.knots, f.knot_values
    if vs[0] > top or vs[-1] < bottom:
        raise ClaspError("an end value already lies in a trimmed band")
    b = xs[-1]
    for i in range(len(xs) - 1):
        if vs[i + 1] > top:
            b = xs[i] + (top - vs[i])  # rising segment crosses the level
            break
    a = xs[0]
    for i in range(len(xs) - 1, 0, -1):
        if vs[i - 1] < bottom:
            a = xs[i] - (vs[i] - bottom)  # falling (leftwards) segment crosses
            break
    return a, b


def bing1952_clasp(node, spacing) -> ClaspChoice:
    """Trim one spacing interval off the top (child 0) and bottom (child 1) of the image."""
    f = node.path
    spacing = Fraction(spacing)
    img = image(f)
    if not img.length > 2 * spacing:
        raise GoalMet(f"diameter {img.length} <= 2 * spacing {spacing}")
    a, b = _trim_points(f, img.hi - spacing, img.lo + spacing)
    if a > b:
        raise ClaspError(f"trim points cross: a={a} > b={b}")
    return ClaspChoice(a, b)


class GoalMet(Exception):
    """The current diameter goal is met; the 1952 strategy moves to the next goal."""


@dataclass(frozen=True)
class GoalState:
    goal_index: int
    spacing: Fraction
    halted: bool = False


class Bing1952Strategy:
    name = "bing1952"
    interpretive = False

    def __init__(self, cfg: Bing1952):
        self.cfg = cfg

    def root_state(self) -> GoalState:
        return GoalState(0, Fraction(1, self.cfg.plane_count))

    def children(self, node, depth):
        st: GoalState = node.state
        while not st.halted:
            try:
                clasp = bing1952_clasp(node, st.spacing)
                return clasp, st, st
            except ClaspError:
                # the image oscillates through both bands: no single clasp trims it
                st = GoalState(st.goal_index, st.spacing, True)
            except GoalMet:
                nxt = st.goal_index + 1
                goals = self.cfg.goal_sequence
                if nxt >= len(goals):
                    st = GoalState(st.goal_index, st.spacing, True)
                else:
                    st = GoalState(nxt, goals[nxt] / 2)
        # halted: the zero-displacement clasp copies the mother into both children
        dom = node.path.domain
        return ClaspChoice(dom.lo, dom.hi), st, st

    def extremal_key(self, node):
        return (diameter(node.path),)

    def done(self, node) -> bool:
        return node.state.halted

    def phase_info(self, node):
        return None, None


# -- Bing 1988 (interpretive) ----------------------------------------------------

GREEDY_BISECTIONS = 40


def _patient_bound(f: FoldedPath) -> Fraction:
    """Largest symmetric displacement keeping both extremes in each daughter's overlap."""
    xs, vs = f.knots, f.knot_values
    c, d = xs[0], xs[-1]
    bound = (d - c) / 2
    for level in (min(vs), max(vs)):
        where = [x for x, v in zip(xs, vs) if v == level]
        bound = min(bound, d - where[0], where[-1] - c)
    return bound


def bing1988_clasp(node, step_parity: str, patient_delta) -> ClaspChoice:
    """Greedy parity trims toward half the image extent; patient parity nudges both ends.

    This encoding is interpretive: the source describes the rotations only pictorially.
    """
    f = node.path
    dom = f.domain
    img = image(f)
    if step_parity == "patient":
        delta = min(Fraction(patient_delta), _patient_bound(f))
        return ClaspChoice(dom.lo + delta, dom.hi - delta)
    if step_parity != "greedy":
        raise ValueError("step_parity must be 'greedy' or 'patient'")
    def attempt(s):
        try:
            a, b = _trim_points(f, img.hi - s, img.lo + s)
        except ClaspError:
            return None
        return (a, b) if a <= b else None

    s = img.length / 2
    found = attempt(s)
    if found is None:
        # feasibility is monotone in s: bisect for the largest available trim
        lo_s, hi_s = Fraction(0), s
        for _ in range(GREEDY_BISECTIONS):
            mid = (lo_s + hi_s) / 2
            if attempt(mid) is None:
                hi_s = mid
            else:
                lo_s = mid
        found = attempt(lo_s)
    return ClaspChoice(*found)


class Bing1988Strategy:
    name = "bing1988"
    interpretive = True

    def __init__(self, cfg: Bing1988):
        self.cfg = cfg

    def root_state(self):
        return None

    def children(self, node, depth):
        parity = "greedy" if depth % 2 == 0 else "patient"
        return bing1988_clasp(node, parity, self.cfg.patient_delta), None, None

    def extremal_key(self, node):
        return (diameter(node.path),)

    def done(self, node) -> bool:
        return False

    def phase_info(self, node):
        return None, None


# -- random clasps ---------------------------------------------------------------

def clasp_from_key(c: int, d: int, key: int) -> tuple[int, int]:
    span = d - c
    x1 = c + _core.scaled_draw(_core.uniform_int(key, 0), span)
    x2 = c + _core.scaled_draw(_core.uniform_int(key, 1), span)
    return (x1, x2) if x1 <= x2 else (x2, x1)


def random_clasp(node, seed: int) -> ClaspChoice:
    """Order statistics of two uniform draws keyed by (seed, sigma)."""
    dom = node.path.domain
    key = _core.node_key(seed, node.id)
    a, b = clasp_from_key(to_grid(dom.lo), to_grid(dom.hi), key)
    return ClaspChoice(from_grid(a), from_grid(b))


class RandomStrategy:
    name = "random"
    interpretive = False

    def __init__(self, cfg: RandomClasps):
        self.cfg = cfg

    def root_state(self) -> int:
        return _core.root_key(self.cfg.seed)

    def children(self, node, depth):
        dom = node.path.domain
        key = node.state
        a, b = clasp_from_key(to_grid(dom.lo), to_grid(dom.hi), key)
        return (
            ClaspChoice(from_grid(a), from_grid(b)),
            _core.child_key(key, 0),
            _core.child_key(key, 1),
        )

    def extremal_key(self, node):
        return (diameter(node.path),)

    def done(self, node) -> bool:
        return False

    def phase_info(self, node):
        return None, None


def make_strategy(cfg: StrategyConfig, stop_after_phases: Optional[int] = None):
    if isinstance(cfg, SmallDisplacement):
        return SmallDisplacementStrategy(cfg, stop_after_phases)
    if isinstance(cfg, Bing1952):
        return Bing1952Strategy(cfg)
    if isinstance(cfg, Bing1988):
        return Bing1988Strategy(cfg)
    if isinstance(cfg, RandomClasps):
        return RandomStrategy(cfg)
    raise TypeError(f"unknown strategy config {cfg!r}")
