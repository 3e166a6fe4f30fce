"""Compiled single-path engine for long small-displacement and random-clasp runs.

The tree engine materializes every node as exact ``FoldedPath`` objects, which
is the reference behavior but far too slow for paths hundreds of thousands of
steps deep.  This engine follows one root-to-leaf path at a time on the dyadic
grid with int64 arithmetic, using numba-compiled copies of the scalar routines
in ``_core``, so every clasp it produces is bit-identical to the tree engine's.

Small displacement: the function along the path is kept as a deque of
(x, value) knots.  Each round's center is chosen in Python (the same
``select_center`` call the tree engine makes); the kernel then steps until the
followed child leaves the round's quadrant.

Random clasps: turn counts can explode, so the path keeps only its clasp
history (O(depth) memory) and recovers each image by mapping the domain back
to the root one fold at a time.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from numba import njit, uint64

from . import _core
from .bingtree import DepthProfile
from .strategies import PhaseState, SmallDisplacement, clasp_from_key, small_disp_start_round

_tangent_disp = njit(cache=True)(_core.tangent_disp)
_step_length = njit(cache=True)(_core.step_length)
_eps_term = njit(cache=True)(_core.eps_term)
_stop_eval = njit(cache=True)(_core.stop_eval)
_inside = njit(cache=True)(_core.inside_quadrant)
_scaled_draw = njit(cache=True)(_core.scaled_draw)

_GOLDEN = uint64(_core.GOLDEN)
_MIX_A = uint64(_core.MIX_A)
_MIX_B = uint64(_core.MIX_B)
_CHILD0 = uint64(_core.CHILD_SALT[0])
_CHILD1 = uint64(_core.CHILD_SALT[1])
_BRANCH = uint64(_core.BRANCH_SALT)
_CLASP0 = uint64(_core.CLASP_SALT[0])
_CLASP1 = uint64(_core.CLASP_SALT[1])
_PATH = uint64(_core.PATH_SALT)
_USHIFT = uint64(64 - _core.UNIFORM_BITS)

ONE = _core.ONE_INT
INV = _core.INV_SCALE

# kernel status codes
STOPPED, AT_MAX_DEPTH, NEED_DEQUE, NEED_PROFILE = 0, 1, 2, 3
# violation codes
V_LENGTH, V_DISP = 1, 2

# integer state slots
I_HEAD, I_TAIL, I_C, I_D, I_DEPTH, I_LO, I_L, I_M, I_MM, I_T, I_HIGH, I_PHASE = range(12)
I_IMGLO, I_IMGHI, I_MAXDEPTH, I_VDEPTH, I_VCODE, I_MODE, I_TRACK, I_NREACH = range(12, 20)
N_ISTATE = 20
# float state slots
F_EPS, F_OX, F_OY, F_BOUND = range(4)

# profile rows
P_COUNT, P_MAXDIAM, P_SUMDIAM, P_MAXLEN, P_EXP, P_MAXDISP, P_SUMDISP, P_DCOUNT = range(8)
N_PROF = 8


# -- hashing ------------------------------------------------------------------

@njit(cache=True)
def _mix(z):
    z = uint64(z) + _GOLDEN
    z = (z ^ (z >> uint64(30))) * _MIX_A
    z = (z ^ (z >> uint64(27))) * _MIX_B
    return z ^ (z >> uint64(31))


@njit(cache=True)
def _child_key(key, bit):
    key = uint64(key)
    if bit == 0:
        return _mix(key ^ _CHILD0)
    return _mix(key ^ _CHILD1)


@njit(cache=True)
def _branch_bit(key):
    key = uint64(key)
    return np.int64(_mix(key ^ _BRANCH) & uint64(1))


@njit(cache=True)
def _uniform(key, which):
    key = uint64(key)
    salt = _CLASP0 if which == 0 else _CLASP1
    return np.int64(_mix(key ^ salt) >> _USHIFT)


@njit(cache=True)
def _path_root(root, index):
    root = uint64(root)
    return _mix(root ^ _mix(uint64(index) ^ _PATH))


def hash_selftest(seed: int, sigma: str) -> tuple[int, int, int, int]:
    """Compiled (node key, branch bit, uniform0, path-3 root) for cross-checking."""
    root = np.uint64(int(_mix(np.uint64(seed))))
    key = root
    for ch in sigma:
        key = np.uint64(int(_child_key(key, 1 if ch == "1" else 0)))
    return int(key), int(_branch_bit(key)), int(_uniform(key, 0)), int(_path_root(root, 3))


# -- knot deque ------------------------------------------------------------------

@njit(cache=True)
def _eval(X, V, head, tail, x):
    hi = tail - 1
    if x >= X[hi]:
        return V[hi]
    lo = head
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if X[mid] <= x:
            lo = mid
        else:
            hi = mid
    if V[lo + 1] > V[lo]:
        return V[lo] + (x - X[lo])
    return V[lo] - (x - X[lo])


@njit(cache=True)
def _rescan(X, V, head, tail, ist):
    lo = V[head]
    hi = V[head]
    for i in range(head + 1, tail):
        if V[i] < lo:
            lo = V[i]
        if V[i] > hi:
            hi = V[i]
    ist[I_IMGLO] = lo
    ist[I_IMGHI] = hi


@njit(cache=True)
def _fold0(X, V, ist, c, a, b):
    """Replace the path by its child 0 for clasp (a, b): domain [2c - a, b]."""
    head = ist[I_HEAD]
    tail = ist[I_TAIL]
    if b == c:
        return
    fa = _eval(X, V, head, tail, a)
    fb = _eval(X, V, head, tail, b)
    j = head + 1
    while X[j] < a:
        j += 1
    lo = ist[I_IMGLO]
    hi = ist[I_IMGHI]
    rescan = False
    k = tail - 1
    while k > head and X[k] >= b:
        if V[k] == lo or V[k] == hi:
            rescan = True
        k -= 1
    tail = k + 1
    X[tail] = b
    V[tail] = fb
    tail += 1
    if a > c:
        nh = head
        for i in range(head + 1, j):
            nh -= 1
            X[nh] = 2 * c - X[i]
            V[nh] = V[i]
        nh -= 1
        X[nh] = 2 * c - a
        V[nh] = fa
        head = nh
    ist[I_HEAD] = head
    ist[I_TAIL] = tail
    if rescan:
        _rescan(X, V, head, tail, ist)


@njit(cache=True)
def _fold1(X, V, ist, d, a, b):
    """Replace the path by its child 1 for clasp (a, b): domain [a, 2d - b]."""
    head = ist[I_HEAD]
    tail = ist[I_TAIL]
    if a == d:
        return
    fa = _eval(X, V, head, tail, a)
    fb = _eval(X, V, head, tail, b)
    j = tail - 2
    while X[j] > b:
        j -= 1
    lo = ist[I_IMGLO]
    hi = ist[I_IMGHI]
    rescan = False
    k = head
    while k < tail - 1 and X[k] <= a:
        if V[k] == lo or V[k] == hi:
            rescan = True
        k += 1
    head = k - 1
    X[head] = a
    V[head] = fa
    if b < d:
        nt = tail
        for i in range(tail - 2, j, -1):
            X[nt] = 2 * d - X[i]
            V[nt] = V[i]
            nt += 1
        X[nt] = 2 * d - b
        V[nt] = fb
        tail = nt + 1
    ist[I_HEAD] = head
    ist[I_TAIL] = tail
    if rescan:
        _rescan(X, V, head, tail, ist)


# -- backward image map ---------------------------------------------------------------

@njit(cache=True)
def _back_image(C, D, bits, k):
    """Image length of the depth-k node of a path from its domain history.

    Child 0 of a node with domain [c, d] agrees with it on [c, b] and mirrors it
    about c; child 1 mirrors about d.  Pulling the interval back one fold at a
    time reaches the root, where the function is the identity.
    """
    u = C[k]
    v = D[k]
    for j in range(k - 1, -1, -1):
        if bits[j] == 0:
            cj = C[j]
            if u >= cj:
                continue
            if v <= cj:
                u, v = 2 * cj - v, 2 * cj - u
            else:
                w = 2 * cj - u
                if w > v:
                    v = w
                u = cj
        else:
            dj = D[j]
            if v <= dj:
                continue
            if u >= dj:
                u, v = 2 * dj - v, 2 * dj - u
            else:
                w = 2 * dj - v
                if w < u:
                    u = w
                v = dj
    return v - u


@njit(cache=True)
def _first_below(C, D, bits, last, target):
    """Least depth k <= last whose image length is < target, or -1 (lengths never increase)."""
    if _back_image(C, D, bits, last) >= target:
        return -1
    lo = -1
    hi = last
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if _back_image(C, D, bits, mid) < target:
            hi = mid
        else:
            lo = mid
    return hi


# -- small-displacement round kernel ------------------------------------------------

@njit(cache=True)
def _sd_round(X, V, C, D, ist, fst, keys, bits, prof, targets, reach, skind, sp0, sp1, sterms):
    """Step one path until its followed child leaves the round's quadrant.

    With ``ist[I_TRACK] == 1`` the function is carried as a knot deque and every
    depth's image is recorded; otherwise only the domain history C, D is kept.
    """
    eps = fst[F_EPS]
    ox = fst[F_OX]
    oy = fst[F_OY]
    bound = fst[F_BOUND]
    lo = ist[I_LO]
    L = ist[I_L]
    track = ist[I_TRACK]
    cap = X.shape[0]
    while True:
        depth = ist[I_DEPTH]
        if depth >= ist[I_MAXDEPTH]:
            return AT_MAX_DEPTH
        if depth + 1 >= prof.shape[1] or depth >= bits.shape[0]:
            return NEED_PROFILE
        if track == 0 and depth + 1 >= C.shape[0]:
            return NEED_PROFILE
        if track == 1:
            n = ist[I_TAIL] - ist[I_HEAD]
            if ist[I_HEAD] < n + 2 or cap - ist[I_TAIL] < n + 2:
                return NEED_DEQUE
        c = ist[I_C]
        d = ist[I_D]
        eps_i = _eps_term(skind, sp0, sp1, sterms, depth + 1)
        h = _step_length(eps, eps_i, d - c)
        da, db = _tangent_disp(c, d, ox, oy, h)
        a = c + da
        b = d - db
        disp = da if da > db else db
        prof[P_EXP, depth] += 1
        if disp > prof[P_MAXDISP, depth]:
            prof[P_MAXDISP, depth] = disp
        prof[P_SUMDISP, depth] += disp
        if not (da * INV < eps_i and db * INV < eps_i and da * INV < eps and db * INV < eps):
            if ist[I_VDEPTH] < 0:
                ist[I_VDEPTH] = depth
                ist[I_VCODE] = V_DISP
        M = ist[I_M]
        if a > M:
            M = a
        m = ist[I_MM]
        if b < m:
            m = b
        ist[I_M] = M
        ist[I_MM] = m
        x0 = 2 * c - a
        y0 = b
        x1 = a
        y1 = 2 * d - b
        in0 = _inside(lo, L, x0, y0)
        in1 = _inside(lo, L, x1, y1)
        key = keys[0]
        if ist[I_MODE] == 0:
            bit = _branch_bit(key)
        elif in0:
            bit = 0
        elif in1:
            bit = 1
        else:
            r0 = _stop_eval(ist[I_HIGH], ist[I_T], M, m, lo, L, x0, y0, eps, ist[I_PHASE])
            r1 = _stop_eval(ist[I_HIGH], ist[I_T], M, m, lo, L, x1, y1, eps, ist[I_PHASE])
            len0 = (y0 - x0) if r0[5] > 0 else r0[2]
            len1 = (y1 - x1) if r1[5] > 0 else r1[2]
            bit = 0
            if r1[4] < r0[4] or (r1[4] == r0[4] and len1 > len0):
                bit = 1
        keys[0] = _child_key(key, bit)
        if bit == 0:
            if track == 1:
                _fold0(X, V, ist, c, a, b)
            nc = x0
            nd = y0
            inside = in0
        else:
            if track == 1:
                _fold1(X, V, ist, d, a, b)
            nc = x1
            nd = y1
            inside = in1
        bits[depth] = bit
        depth += 1
        ist[I_DEPTH] = depth
        ist[I_C] = nc
        ist[I_D] = nd
        prof[P_COUNT, depth] += 1
        if nd - nc > prof[P_MAXLEN, depth]:
            prof[P_MAXLEN, depth] = nd - nc
        if track == 1:
            diam = ist[I_IMGHI] - ist[I_IMGLO]
            prof[P_DCOUNT, depth] += 1
            if diam > prof[P_MAXDIAM, depth]:
                prof[P_MAXDIAM, depth] = diam
            prof[P_SUMDIAM, depth] += diam
            while ist[I_NREACH] < targets.shape[0] and diam < targets[ist[I_NREACH]]:
                reach[ist[I_NREACH]] = depth
                ist[I_NREACH] += 1
        else:
            C[depth] = nc
            D[depth] = nd
        if not ((nd - nc) * INV < bound):
            if ist[I_VDEPTH] < 0:
                ist[I_VDEPTH] = depth
                ist[I_VCODE] = V_LENGTH
        if not inside:
            return STOPPED


@dataclass
class PhaseEnd:
    path: int
    depth: int
    phase: int
    eps: float
    diameter: int  # grid units


@dataclass
class Violation:
    path: int
    depth: int
    check: str
    sigma: str

    def describe(self) -> str:
        short = self.sigma if len(self.sigma) <= 64 else self.sigma[:32] + "..." + self.sigma[-16:]
        return f"path {self.path} depth {self.depth}: {self.check} at sigma {short}"


@dataclass
class SDResult:
    """Aggregates over a batch of small-displacement paths (grid integers).

    ``reach[i][t]`` is the first depth at which path i's image length drops
    below target t (None if it never does before the path ends).
    """

    prof: np.ndarray
    targets: tuple[int, ...] = ()
    depths: list[int] = field(default_factory=list)
    reach: list[list[Optional[int]]] = field(default_factory=list)
    final_diameters: list[int] = field(default_factory=list)
    phase_ends: list[PhaseEnd] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    stops: int = 0
    max_contraction: float = 0.0  # max new/old retrace length over stops
    rounds: int = 0
    paths: list[int] = field(default_factory=list)

    def merge(self, other: "SDResult") -> "SDResult":
        n = max(self.prof.shape[1], other.prof.shape[1])
        prof = np.zeros((N_PROF, n), dtype=np.int64)
        for src in (self.prof, other.prof):
            k = src.shape[1]
            for row in (P_COUNT, P_SUMDIAM, P_EXP, P_SUMDISP, P_DCOUNT):
                prof[row, :k] += src[row]
            for row in (P_MAXDIAM, P_MAXLEN, P_MAXDISP):
                prof[row, :k] = np.maximum(prof[row, :k], src[row])
        return SDResult(
            prof,
            self.targets,
            self.depths + other.depths,
            self.reach + other.reach,
            self.final_diameters + other.final_diameters,
            self.phase_ends + other.phase_ends,
            self.violations + other.violations,
            self.stops + other.stops,
            max(self.max_contraction, other.max_contraction),
            self.rounds + other.rounds,
            self.paths + other.paths,
        )

    def sort(self) -> "SDResult":
        """Order per-path lists by path index (merge order then no longer matters)."""
        order = sorted(range(len(self.paths)), key=lambda i: self.paths[i])
        self.paths = [self.paths[i] for i in order]
        self.depths = [self.depths[i] for i in order]
        self.reach = [self.reach[i] for i in order]
        self.final_diameters = [self.final_diameters[i] for i in order]
        self.phase_ends.sort(key=lambda e: (e.path, e.depth, e.phase))
        self.violations.sort(key=lambda v: (v.path, v.depth))
        return self

    def trimmed_profile(self) -> np.ndarray:
        nz = np.nonzero(self.prof[P_COUNT])[0]
        last = int(nz[-1]) + 1 if len(nz) else 1
        return self.prof[:, :last]

    def depth_profile(self) -> DepthProfile:
        return profile_from_array(self.trimmed_profile())

    def stages_to_target(self) -> dict[int, Optional[int]]:
        """First depth by which every followed path is below each target.

        A path that ends above a target keeps the target unreached.
        """
        out = {}
        for j, t in enumerate(self.targets):
            worst = 0
            for r in self.reach:
                if r[j] is None:
                    worst = None
                    break
                worst = max(worst, r[j])
            out[t] = worst
        return out


def profile_from_array(prof: np.ndarray) -> DepthProfile:
    g = 1 << _core.GRID_BITS
    out = DepthProfile()
    for k in range(prof.shape[1]):
        cnt = int(prof[P_COUNT, k])
        dc = int(prof[P_DCOUNT, k])
        out.count.append(cnt)
        out.diam_count.append(dc)
        out.max_diameter.append(Fraction(int(prof[P_MAXDIAM, k]), g) if dc else None)
        out.min_diameter.append(None)
        out.sum_diameter.append(Fraction(int(prof[P_SUMDIAM, k]), g))
        out.max_length.append(Fraction(int(prof[P_MAXLEN, k]), g) if cnt else None)
        e = int(prof[P_EXP, k])
        out.expanded.append(e)
        out.max_displacement.append(Fraction(int(prof[P_MAXDISP, k]), g) if e else None)
        out.sum_displacement.append(Fraction(int(prof[P_SUMDISP, k]), g))
    return out


def _grow(arr: np.ndarray, n: int) -> np.ndarray:
    if arr.ndim == 1:
        out = np.zeros(n, dtype=arr.dtype)
        out[: arr.shape[0]] = arr
    else:
        out = np.zeros((arr.shape[0], n), dtype=arr.dtype)
        out[:, : arr.shape[1]] = arr
    return out


def _recenter(X, V, ist):
    head, tail = int(ist[I_HEAD]), int(ist[I_TAIL])
    n = tail - head
    cap = max(X.shape[0] * 2, 8 * n + 64)
    X2 = np.zeros(cap, dtype=np.int64)
    V2 = np.zeros(cap, dtype=np.int64)
    start = (cap - n) // 2
    X2[start:start + n] = X[head:tail]
    V2[start:start + n] = V[head:tail]
    ist[I_HEAD] = start
    ist[I_TAIL] = start + n
    return X2, V2


DEFAULT_STRIDE = 1024


def _record_diam(prof, k, diam):
    prof[P_DCOUNT, k] += 1
    prof[P_MAXDIAM, k] = max(int(prof[P_MAXDIAM, k]), diam)
    prof[P_SUMDIAM, k] += diam


def run_sd_path(
    cfg: SmallDisplacement,
    mode: str,
    index: int,
    run_seed: int,
    max_depth: int,
    stop_after_phases: Optional[int],
    result: SDResult,
    track: Optional[bool] = None,
    stride: int = DEFAULT_STRIDE,
    until_targets: bool = False,
) -> SDResult:
    """Follow one path (sampled path ``index`` or the extremal path).

    ``track`` carries the whole function (every depth's image is exact); the
    default tracks only on the extremal path.  Untracked paths record images
    at stops, phase ends, every ``stride`` depths and at each target crossing.
    ``until_targets`` ends a tracked path at the first stop after its last
    target is reached.
    """
    if track is None:
        track = mode == "extremal"
    skind, sp0, sp1, sterms = cfg.schedule.kernel_params()
    cap = 256 if track else 4
    X = np.zeros(cap, dtype=np.int64)
    V = np.zeros(cap, dtype=np.int64)
    C = np.zeros(1 if track else 4096, dtype=np.int64)
    D = np.zeros(1 if track else 4096, dtype=np.int64)
    ist = np.zeros(N_ISTATE, dtype=np.int64)
    fst = np.zeros(4, dtype=np.float64)
    mid = cap // 2
    X[mid], V[mid], X[mid + 1], V[mid + 1] = 0, 0, ONE, ONE
    ist[I_HEAD], ist[I_TAIL] = mid, mid + 2
    ist[I_C], ist[I_D] = 0, ONE
    C[0], D[0] = 0, ONE
    ist[I_IMGLO], ist[I_IMGHI] = 0, ONE
    ist[I_MAXDEPTH] = max_depth
    ist[I_VDEPTH] = -1
    ist[I_MODE] = 0 if mode == "sampled" else 1
    ist[I_TRACK] = 1 if track else 0
    fst[F_BOUND] = 1.0 + cfg.eps_L
    targets = np.array(result.targets, dtype=np.int64)
    reach = np.full(len(targets), -1, dtype=np.int64)
    while ist[I_NREACH] < len(targets) and ONE < targets[ist[I_NREACH]]:
        reach[ist[I_NREACH]] = 0
        ist[I_NREACH] += 1
    keys = np.zeros(1, dtype=np.uint64)
    keys[0] = np.uint64(_core.path_root(run_seed, index))
    bits = np.zeros(4096, dtype=np.uint8)
    prof = result.prof
    if prof.shape[1] < 1024:
        prof = _grow(prof, 1024)
    prof[P_COUNT, 0] += 1
    prof[P_MAXLEN, 0] = max(int(prof[P_MAXLEN, 0]), ONE)
    _record_diam(prof, 0, ONE)
    recorded = {0}

    def diam_now(k: int) -> int:
        if track:
            return int(ist[I_IMGHI] - ist[I_IMGLO])
        return int(_back_image(C, D, bits, k))

    state = PhaseState(cfg.initial_eps, ONE, "high", 1)
    status = AT_MAX_DEPTH
    while True:
        if stop_after_phases is not None and state.phase_index > stop_after_phases:
            break
        if int(ist[I_DEPTH]) >= max_depth:
            break
        if until_targets and track and int(ist[I_NREACH]) == len(targets):
            break
        c, d, depth = int(ist[I_C]), int(ist[I_D]), int(ist[I_DEPTH])
        state = small_disp_start_round(state, c, d, depth, cfg.eps_L)
        rnd = state.round
        result.rounds += 1
        ist[I_LO], ist[I_L], ist[I_M], ist[I_MM] = rnd.lo, rnd.L, rnd.M, rnd.m
        ist[I_T] = state.retrace_boundary
        ist[I_HIGH] = 1 if state.wiggle_side == "high" else 0
        ist[I_PHASE] = state.phase_index
        fst[F_EPS] = state.eps_phase
        fst[F_OX], fst[F_OY] = rnd.bullseye.center.x, rnd.bullseye.center.y
        while True:
            status = _sd_round(X, V, C, D, ist, fst, keys, bits, prof, targets, reach,
                               skind, sp0, sp1, sterms)
            if status == NEED_DEQUE:
                X, V = _recenter(X, V, ist)
            elif status == NEED_PROFILE:
                depth = int(ist[I_DEPTH])
                if depth + 1 >= prof.shape[1]:
                    prof = _grow(prof, max(2 * prof.shape[1], depth + 2))
                if depth >= bits.shape[0]:
                    bits = _grow(bits, max(2 * bits.shape[0], depth + 2))
                if not track and depth + 1 >= C.shape[0]:
                    C = _grow(C, max(2 * C.shape[0], depth + 2))
                    D = _grow(D, max(2 * D.shape[0], depth + 2))
            else:
                break
        if status == AT_MAX_DEPTH:
            break
        x, y = int(ist[I_C]), int(ist[I_D])
        nh, t, new_len, eps, phase, n_ended, _ = _core.stop_eval(
            int(ist[I_HIGH]), state.retrace_boundary, int(ist[I_M]), int(ist[I_MM]),
            rnd.lo, rnd.L, x, y, state.eps_phase, state.phase_index,
        )
        result.stops += 1
        result.max_contraction = max(result.max_contraction, new_len / rnd.L)
        depth = int(ist[I_DEPTH])
        if not 3 * new_len < 2 * rnd.L:
            _violate(result, index, depth, "retrace contraction >= 2/3", bits)
        if n_ended:
            diam = diam_now(depth)
            if not track and depth not in recorded:
                _record_diam(prof, depth, diam)
                recorded.add(depth)
            for k in range(n_ended):
                e = state.eps_phase / 2**k
                result.phase_ends.append(PhaseEnd(index, depth, state.phase_index + k, e, diam))
                if not diam * INV < 2 * e:
                    _violate(result, index, depth, f"phase {state.phase_index + k} end diameter >= 2 eps", bits)
        state = PhaseState(eps, t, "high" if nh else "low", phase, None, state.rounds_started)

    last = int(ist[I_DEPTH])
    if not track:
        for k in range(stride, last + 1, stride):
            if k not in recorded:
                _record_diam(prof, k, int(_back_image(C, D, bits, k)))
                recorded.add(k)
        for j, tgt in enumerate(targets):
            if reach[j] < 0:
                reach[j] = _first_below(C, D, bits, last, int(tgt))
    if ist[I_VDEPTH] >= 0:
        code = "domain length >= 1 + eps_L" if ist[I_VCODE] == V_LENGTH else "displacement >= eps"
        _violate(result, index, int(ist[I_VDEPTH]), code, bits)
    result.prof = prof
    result.paths.append(index)
    result.depths.append(last)
    result.final_diameters.append(diam_now(last))
    result.reach.append([int(r) if r >= 0 else None for r in reach])
    return result


def _violate(result: SDResult, index: int, depth: int, check: str, bits) -> None:
    sigma = "".join("1" if b else "0" for b in bits[:depth])
    result.violations.append(Violation(index, depth, check, sigma))


def _to_grid_targets(targets) -> tuple[int, ...]:
    return tuple(int(Fraction(t) * ONE) if Fraction(t) * ONE == int(Fraction(t) * ONE)
                 else math.ceil(Fraction(t) * ONE) for t in targets)


def _sd_batch(args) -> SDResult:
    cfg, mode, indices, run_seed, max_depth, phases, targets, track, stride, until = args
    res = SDResult(np.zeros((N_PROF, 1024), dtype=np.int64), targets)
    for i in indices:
        run_sd_path(cfg, mode, i, run_seed, max_depth, phases, res, track, stride, until)
    return res


MAX_SD_PATHS = 4096  # keeps per-depth int64 sums of grid lengths from overflowing


def run_sd_paths(
    cfg: SmallDisplacement,
    mode: str,
    count: int,
    run_seed: int,
    max_depth: int,
    stop_after_phases: Optional[int] = None,
    workers: int = 1,
    targets=(),
    track: Optional[bool] = None,
    stride: int = DEFAULT_STRIDE,
    until_targets: bool = False,
) -> SDResult:
    """Run ``count`` sampled paths (or the single extremal path) and merge the results.

    Targets are image lengths; a target t counts as reached once the length is
    below t, compared exactly on the grid (t is rounded up to the grid).
    """
    if mode == "extremal":
        count = 1
    if count > MAX_SD_PATHS:
        raise ValueError(f"at most {MAX_SD_PATHS} paths per run")
    gt = _to_grid_targets(targets)
    if list(gt) != sorted(gt, reverse=True):
        raise ValueError("targets must be decreasing")
    indices = list(range(count))
    jobs = [indices[i::workers] for i in range(max(workers, 1))]
    jobs = [(cfg, mode, ch, run_seed, max_depth, stop_after_phases, gt, track, stride, until_targets)
            for ch in jobs if ch]
    if workers <= 1 or len(jobs) == 1:
        parts = [_sd_batch(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sd_batch, jobs))
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out.sort()


# -- random clasps ----------------------------------------------------------------

@njit(cache=True)
def _random_paths(first, n_paths, depth, run_root, strat_root, out, failed):
    C = np.zeros(depth + 1, dtype=np.int64)
    D = np.zeros(depth + 1, dtype=np.int64)
    bits = np.zeros(depth + 1, dtype=np.uint8)
    n_failed = 0
    for p in range(n_paths):
        pk = _path_root(run_root, first + p)
        sk = strat_root
        C[0] = 0
        D[0] = ONE
        out[p, 0] = ONE
        for k in range(depth):
            c = C[k]
            d = D[k]
            span = d - c
            x1 = c + _scaled_draw(_uniform(sk, 0), span)
            x2 = c + _scaled_draw(_uniform(sk, 1), span)
            a = x1 if x1 <= x2 else x2
            b = x2 if x1 <= x2 else x1
            bit = _branch_bit(pk)
            pk = _child_key(pk, bit)
            sk = _child_key(sk, bit)
            bits[k] = bit
            if bit == 0:
                C[k + 1] = 2 * c - a
                D[k + 1] = b
            else:
                C[k + 1] = a
                D[k + 1] = 2 * d - b
            if C[k + 1] < -(1 << 61) or D[k + 1] > (1 << 61):
                failed[p] = 1
                n_failed += 1
                break
            out[p, k + 1] = _back_image(C, D, bits, k + 1)
    return n_failed


def _back_image_exact(C, D, bits, k) -> int:
    """``_back_image`` on Python ints (no range limit)."""
    u, v = C[k], D[k]
    for j in range(k - 1, -1, -1):
        if bits[j] == 0:
            cj = C[j]
            if u >= cj:
                continue
            if v <= cj:
                u, v = 2 * cj - v, 2 * cj - u
            else:
                v = max(v, 2 * cj - u)
                u = cj
        else:
            dj = D[j]
            if v <= dj:
                continue
            if u >= dj:
                u, v = 2 * dj - v, 2 * dj - u
            else:
                u = min(u, 2 * dj - v)
                v = dj
    return v - u


def random_path_exact(index: int, depth: int, run_seed: int, strategy_seed: int) -> list[int]:
    """One sampled random-clasp path on unbounded integers; same draws as the compiled kernel."""
    pk = _core.path_root(run_seed, index)
    sk = _core.root_key(strategy_seed)
    C, D, bits = [0], [ONE], []
    out = [ONE]
    for k in range(depth):
        x1, x2 = clasp_from_key(C[k], D[k], sk)
        bit = _core.branch_bit(pk)
        pk = _core.child_key(pk, bit)
        sk = _core.child_key(sk, bit)
        bits.append(bit)
        if bit == 0:
            C.append(2 * C[k] - x1)
            D.append(x2)
        else:
            C.append(x1)
            D.append(2 * D[k] - x2)
        out.append(_back_image_exact(C, D, bits, k + 1))
    return out


def random_path_diameters(first: int, n_paths: int, depth: int, run_seed: int, strategy_seed: int) -> np.ndarray:
    """Grid-integer image diameters, shape (n_paths, depth + 1), for sampled random-clasp paths.

    Rare paths whose domains outgrow the int64 grid range are recomputed on
    Python integers; diameters never exceed 1, so the table stays int64.
    """
    out = np.zeros((n_paths, depth + 1), dtype=np.int64)
    failed = np.zeros(n_paths, dtype=np.uint8)
    _random_paths(
        first, n_paths, depth,
        np.uint64(_core.root_key(run_seed)), np.uint64(_core.root_key(strategy_seed)), out, failed,
    )
    for p in np.nonzero(failed)[0]:
        out[p] = random_path_exact(first + int(p), depth, run_seed, strategy_seed)
    return out


def _random_job(args):
    return random_path_diameters(*args)


def random_diameters(trials: int, depth: int, run_seed: int, strategy_seed: int, workers: int = 1) -> np.ndarray:
    chunk = max(1, math.ceil(trials / max(workers, 1)))
    jobs = [(s, min(chunk, trials - s), depth, run_seed, strategy_seed) for s in range(0, trials, chunk)]
    if workers <= 1 or len(jobs) == 1:
        parts = [_random_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_random_job, jobs))
    return np.concatenate(parts, axis=0)
