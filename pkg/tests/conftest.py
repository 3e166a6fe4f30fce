import os
import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from bingshrink.plfun import ClaspChoice, FoldedPath, Interval, fold_daughters, identity_path

settings.register_profile(
    "default", max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_clasp(rng: random.Random, dom: Interval, den: int = 64) -> ClaspChoice:
    """Clasp with points on a 1/den refinement of the domain."""
    span = dom.length
    u = sorted(rng.randint(0, den) for _ in range(2))
    return ClaspChoice(dom.lo + span * Fraction(u[0], den), dom.lo + span * Fraction(u[1], den))


def random_path(rng: random.Random, depth: int) -> FoldedPath:
    f = identity_path()
    for _ in range(depth):
        kids = fold_daughters(f, random_clasp(rng, f.domain))
        f = kids[rng.randint(0, 1)]
    return f


@st.composite
def folded_paths(draw, max_depth: int = 5):
    seed = draw(st.integers(0, 2**32 - 1))
    depth = draw(st.integers(0, max_depth))
    return random_path(random.Random(seed), depth)


@st.composite
def paths_and_clasps(draw, max_depth: int = 5):
    f = draw(folded_paths(max_depth))
    den = draw(st.sampled_from([1, 2, 3, 8, 64]))
    u = sorted(draw(st.integers(0, den)) for _ in range(2))
    dom = f.domain
    clasp = ClaspChoice(dom.lo + dom.length * Fraction(u[0], den), dom.lo + dom.length * Fraction(u[1], den))
    return f, clasp


@pytest.fixture
def fig4():
    """The worked example: identity folded with clasp (1/3, 3/4)."""
    f = identity_path()
    f0, f1 = fold_daughters(f, ClaspChoice(Fraction(1, 3), Fraction(3, 4)))
    return f, f0, f1
