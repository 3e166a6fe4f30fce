"""Scalar arithmetic shared by the exact tree engine and the compiled path engine.

Everything here is written in the subset of Python that numba compiles, so
``fastpath`` jit-compiles these very functions and both engines perform the
same floating point operations in the same order.

Coordinates produced by the small-displacement and random strategies live on
the dyadic grid ``2**-GRID_BITS``; ``*_int`` arguments are grid integers.
"""

from __future__ import annotations

import math

GRID_BITS = 50
SCALE = float(2**GRID_BITS)
INV_SCALE = 1.0 / SCALE
ONE_INT = 1 << GRID_BITS

# Uniform draws carry this many bits.
UNIFORM_BITS = 30

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB
CHILD_SALT = (0xD6E8FEB86659FD93, 0xA0761D6478BD642F)
BRANCH_SALT = 0xE7037ED1A0B428DB
CLASP_SALT = (0x8EBC6AF09C88C6E3, 0x589965CC75374CC3)
PATH_SALT = 0x1D8E4E27C47D124F

STEP_FACTOR = 0.99


# -- splittable hashing (python ints, masked to 64 bits) --------------------

def mix64(z: int) -> int:
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def root_key(seed: int) -> int:
    return mix64(seed & MASK64)


def child_key(key: int, bit: int) -> int:
    return mix64(key ^ CHILD_SALT[bit])


def node_key(seed: int, sigma: str) -> int:
    key = root_key(seed)
    for ch in sigma:
        key = child_key(key, 1 if ch == "1" else 0)
    return key


def branch_bit(key: int) -> int:
    return mix64(key ^ BRANCH_SALT) & 1


def uniform_int(key: int, which: int) -> int:
    """A UNIFORM_BITS-bit draw attached to a node key."""
    return mix64(key ^ CLASP_SALT[which]) >> (64 - UNIFORM_BITS)


def path_root(seed: int, index: int) -> int:
    """Root key of sampled path ``index`` for a run seed."""
    return mix64(root_key(seed) ^ mix64(index ^ PATH_SALT))


def scaled_draw(u: int, span: int) -> int:
    """floor(u * span / 2**UNIFORM_BITS) without overflowing int64."""
    hi = span >> UNIFORM_BITS
    lo = span & ((1 << UNIFORM_BITS) - 1)
    return u * hi + ((u * lo) >> UNIFORM_BITS)


# -- step arithmetic (numba-compatible) -------------------------------------

def eps_term(kind, p0, p1, terms, i):
    """Schedule term eps_i for i >= 1 (kind 0 constant, 1 power, 2 explicit)."""
    if kind == 0:
        return p0
    if kind == 1:
        return p0 * float(i) ** (-p1)
    n = len(terms)
    return terms[i - 1] if i <= n else terms[n - 1]


def step_length(eps_phase, eps_i, length_int):
    """Tangent step length: 0.99 * min(eps_phase, eps_i, half the domain)."""
    half = length_int * INV_SCALE * 0.5
    m = eps_phase
    if eps_i < m:
        m = eps_i
    if half < m:
        m = half
    return STEP_FACTOR * m


def tangent_disp(c_int, d_int, ox, oy, h):
    """Grid displacements (a - c, d - b) of one tangent step of length h.

    The unit tangent has both components in (0, 1) when the center is
    strictly NW of (c, d); flooring keeps each displacement below h.
    """
    vx = c_int * INV_SCALE - ox
    vy = d_int * INV_SCALE - oy
    n = math.sqrt(vx * vx + vy * vy)
    tx = -vy / n
    ty = vx / n
    da = math.floor(h * tx * SCALE)
    db = math.floor(h * ty * SCALE)
    if da < 0:
        da = 0
    if db < 0:
        db = 0
    return da, db


MAX_CASCADE = 64


def inside_quadrant(lo, L, x, y):
    """Exact test of (x, y) against q = (lo + L/3, lo + 2L/3), all on the grid."""
    return 3 * x <= 3 * lo + L and 3 * y >= 3 * lo + 2 * L


def stop_eval(high, t_old, M, m, lo, L, x, y, eps, phase):
    """Bookkeeping for a point (x, y) that has left the quadrant of the round.

    ``high`` is 1 when the round's wiggle sits at the high end (retrace
    [c, t]) and 0 for the low end (retrace [t, d]).  Returns
    (high', t', new_retrace_length, eps', phase', phases_ended, c_exit).
    A retrace shorter than eps closes the phase: eps halves and the whole
    domain becomes the retrace, repeatedly if needed.
    """
    c_exit = 3 * x > 3 * lo + L
    d_exit = 3 * y < 3 * lo + 2 * L
    if high == 1:
        if c_exit:
            nh = 1
            t = m if m < t_old else t_old
        else:
            nh = 0
            t = M
    else:
        if d_exit:
            nh = 0
            t = M if M > t_old else t_old
        else:
            nh = 1
            t = m
    if t < x:
        t = x
    if t > y:
        t = y
    # a c-side exit always leaves a high wiggle, a d-side exit a low one
    ex = nh
    new_len = t - x if nh == 1 else y - t
    length = new_len
    ended = 0
    while length * INV_SCALE < eps and ended < MAX_CASCADE:
        ended += 1
        eps = eps * 0.5
        phase += 1
        nh = 1
        t = y
        length = y - x
    return nh, t, new_len, eps, phase, ended, ex
