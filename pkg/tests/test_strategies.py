import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bingshrink import _core
from bingshrink.bingtree import BingTree, ExpansionMode, TreeNode, depth_profile, grow
from bingshrink.geometry import EpsSchedule
from bingshrink.plfun import ClaspChoice, ClaspError, Interval, diameter, fold_daughters, identity_path, image
from bingshrink.strategies import (
    Bing1952,
    Bing1952Strategy,
    Bing1988,
    Bing1988Strategy,
    GoalMet,
    PhaseState,
    RandomClasps,
    RandomStrategy,
    SmallDisplacement,
    SmallDisplacementStrategy,
    bing1952_clasp,
    bing1988_clasp,
    clasp_from_key,
    from_grid,
    make_strategy,
    random_clasp,
    small_disp_start_round,
    small_disp_stop_check,
    to_grid,
)


def root_node():
    return TreeNode("", identity_path())


@pytest.fixture(scope="module")
def sd_tree():
    cfg = SmallDisplacement()
    tree = BingTree()
    grow(tree, SmallDisplacementStrategy(cfg), ExpansionMode.extremal(40))
    return cfg, tree


@pytest.fixture(scope="module")
def sd_phase_tree():
    cfg = SmallDisplacement()
    tree = BingTree()
    grow(tree, SmallDisplacementStrategy(cfg, 1), ExpansionMode.sampled_paths(4, 11, 10**6))
    return cfg, tree


def test_configs_validate():
    with pytest.raises(ValueError):
        SmallDisplacement(eps_L=-1)
    with pytest.raises(ValueError):
        SmallDisplacement(initial_eps=0)
    with pytest.raises(ValueError):
        SmallDisplacement(schedule=EpsSchedule.power(0.1, 1.0))
    with pytest.raises(ValueError):
        Bing1952(plane_count=2)
    with pytest.raises(ValueError):
        Bing1952(goal_sequence=(F(1, 5), F(1, 2)))
    with pytest.raises(ValueError):
        Bing1988(patient_delta=0)
    with pytest.raises(ValueError):
        RandomClasps(seed=-1)
    assert Bing1952().goal_sequence == (F(1, 5), F(1, 50), F(1, 500))
    with pytest.raises(TypeError):
        make_strategy(object())


def test_small_disp_extremal_depth40(sd_tree):
    cfg, tree = sd_tree
    assert max(len(k) for k in tree.nodes) == 40
    for node in tree.nodes.values():
        assert node.path.domain.length < F(5, 4)
        if node.clasp is not None:
            d0, d1 = node.displacements()
            e = min(cfg.schedule.term(node.depth + 1), node.state.eps_phase)
            assert max(d0, d1) < F(e)


def test_children_lie_on_next_circle(sd_tree):
    _, tree = sd_tree
    checked = 0
    for node in tree.nodes.values():
        rnd = node.state.round
        if rnd is None or node.parent is None:
            continue
        o = rnd.bullseye.center
        r = math.hypot(float(node.path.domain.lo) - o.x, float(node.path.domain.hi) - o.y)
        # grid flooring moves points by at most 2^-50 per coordinate per step
        assert r == pytest.approx(rnd.bullseye.radius, rel=1e-9)
        checked += 1
    assert checked > 20


def test_stop_check_continue_inside():
    st0 = PhaseState(0.05, _core.ONE_INT, "high", 1)
    st1 = small_disp_start_round(st0, 0, _core.ONE_INT, 0, 0.25)
    verdict, same = small_disp_stop_check(st1, 0, _core.ONE_INT)
    assert verdict == "continue" and same is st1


def test_contraction_and_phase_ends(sd_phase_tree):
    _, tree = sd_phase_tree
    stops = ends = 0
    for node in tree.nodes.values():
        s = node.state
        if s.stop is not None:
            stops += 1
            assert 3 * s.stop.new_length < 2 * s.stop.old_length
        for _, e in s.phases_ended:
            ends += 1
            assert diameter(node.path) < 2 * F(e)
    assert stops > 10 and ends >= 4


def test_eps_phase_halves():
    cfg = SmallDisplacement()
    tree = BingTree()
    grow(tree, SmallDisplacementStrategy(cfg, 3), ExpansionMode.extremal(10**6))
    eps = sorted({n.eps_phase for n in tree.nodes.values()}, reverse=True)
    assert eps == [0.05, 0.025, 0.0125, 0.00625]


def test_bing1952_first_clasp():
    f0, f1 = fold_daughters(identity_path(), bing1952_clasp(root_node(), F(1, 10)))
    assert image(f0) == Interval(0, F(9, 10))
    assert image(f1) == Interval(F(1, 10), 1)


def test_bing1952_goal_met():
    with pytest.raises(GoalMet):
        bing1952_clasp(root_node(), F(1, 2))


def test_bing1952_extents():
    tree = BingTree()
    grow(tree, Bing1952Strategy(Bing1952()), ExpansionMode.full(10))
    prof = depth_profile(tree)
    assert all(diameter(n.path) == F(4, 5) for n in tree.nodes.values() if n.depth == 2)
    for k in range(9):
        assert prof.max_diameter[k] == prof.min_diameter[k] == 1 - F(k, 10)
    leaves = [n for n in tree.nodes.values() if n.depth == 10]
    assert len(leaves) == 1024
    assert all(diameter(n.path) < F(1, 5) for n in leaves)
    # frozen: the goal switches at the 2/10 floor, then spacing is 1/100
    assert prof.max_diameter[9] == F(19, 100) and prof.max_diameter[10] == F(9, 50)


def test_bing1952_halts_when_trim_is_infeasible():
    tree = BingTree()
    strat = Bing1952Strategy(Bing1952())
    grow(tree, strat, ExpansionMode.extremal(40))
    deepest = max(tree.nodes.values(), key=lambda n: n.depth)
    assert deepest.state.halted and deepest.depth < 40
    assert diameter(deepest.path) == F(1, 10)


def test_bing1988_greedy_and_patient():
    clasp = bing1988_clasp(root_node(), "greedy", F(1, 100))
    kids = fold_daughters(identity_path(), clasp)
    assert [diameter(k) for k in kids] == [F(1, 2), F(1, 2)]
    with pytest.raises(ValueError):
        bing1988_clasp(root_node(), "lazy", F(1, 100))
    tree = BingTree()
    grow(tree, Bing1988Strategy(Bing1988()), ExpansionMode.full(8))
    patient = [n for n in tree.nodes.values() if n.clasp is not None and n.depth % 2 == 1]
    assert patient
    for n in patient:
        for k in (n.id + "0", n.id + "1"):
            assert diameter(tree.nodes[k].path) == diameter(n.path)
    assert Bing1988Strategy.interpretive


@given(st.integers(0, 2**64 - 1), st.integers(-(2**40), 2**40), st.integers(0, 2**51))
def test_random_clasp_order_statistics(key, c, span):
    a, b = clasp_from_key(c, c + span, key)
    assert c <= a <= b <= c + span


def test_random_clasp_deterministic_and_mode_independent():
    node = TreeNode("0110", identity_path())
    assert random_clasp(node, 5) == random_clasp(node, 5)
    tree = BingTree()
    grow(tree, RandomStrategy(RandomClasps(5)), ExpansionMode.full(5))
    for n in tree.nodes.values():
        if n.clasp is not None:
            assert random_clasp(n, 5) == n.clasp


def test_random_clasp_mean_gap():
    rng = random.Random(1)
    one = _core.ONE_INT
    total = 0
    n = 100_000
    for _ in range(n):
        a, b = clasp_from_key(0, one, rng.getrandbits(64))
        total += b - a
    assert total / n / one == pytest.approx(1 / 3, abs=0.01)


def test_grid_helpers():
    assert to_grid(F(1, 4)) == _core.ONE_INT // 4
    assert from_grid(_core.ONE_INT) == 1
    with pytest.raises(ValueError):
        to_grid(F(1, 3))
