import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bingshrink.bingtree import (
    BingTree,
    ExpansionMode,
    NotAncestorError,
    NotAWError,
    TreeError,
    classify_aw,
    depth_profile,
    grow,
    is_ancestor,
    max_nodes_from_env,
    retrace_bounds,
    verify_lemma1,
)
from bingshrink.plfun import ClaspChoice, ClaspError, Interval, image, identity_path
from bingshrink.strategies import RandomClasps, RandomStrategy, SmallDisplacement, SmallDisplacementStrategy

from conftest import random_clasp


@pytest.fixture
def fig4_tree():
    tree = BingTree()
    tree.expand("", ClaspChoice(F(1, 3), F(3, 4)))
    return tree


def random_chain_tree(rng, depth):
    tree = BingTree()
    sigma = ""
    for _ in range(depth):
        tree.expand(sigma, random_clasp(rng, tree[sigma].path.domain, 32))
        sigma += rng.choice("01")
    return tree, sigma


def test_expand_fig4(fig4_tree):
    assert fig4_tree["0"].path.domain == Interval(F(-1, 3), F(3, 4))
    assert fig4_tree["1"].path.domain == Interval(F(1, 3), F(5, 4))
    assert fig4_tree["0"].parent == ""


def test_expand_identity_clasp():
    tree = BingTree()
    tree.expand("", ClaspChoice(0, 1))
    assert tree["0"].path == identity_path() == tree["1"].path


def test_expand_errors(fig4_tree):
    with pytest.raises(TreeError):
        fig4_tree.expand("", ClaspChoice(0, 1))
    with pytest.raises(ClaspError):
        fig4_tree.expand("0", ClaspChoice(F(1, 2), F(1, 4)))
    with pytest.raises(TreeError):
        fig4_tree["0101"]


def test_random_expansions_keep_invariants():
    rng = random.Random(2)
    tree = BingTree()
    frontier = [""]
    for _ in range(1000):
        sigma = frontier.pop(rng.randrange(len(frontier)))
        i0, i1 = tree.expand(sigma, random_clasp(rng, tree[sigma].path.domain))
        for i in (i0, i1):
            tree[i].path.validate()
            assert image(tree[sigma].path).covers(image(tree[i].path))
        frontier += [i0, i1]


def test_retrace_bounds(fig4_tree):
    rb = retrace_bounds(fig4_tree, "", "0")
    assert (rb.M, rb.m) == (F(1, 3), F(3, 4))
    rb = retrace_bounds(fig4_tree, "0", "0")
    assert (rb.M, rb.m) == (F(-1, 3), F(3, 4))
    with pytest.raises(NotAncestorError):
        retrace_bounds(fig4_tree, "1", "0")


@given(st.integers(0, 2**32))
def test_retrace_bounds_brute_force(seed):
    tree, leaf = random_chain_tree(random.Random(seed), 3)
    for i in range(len(leaf) + 1):
        tau = leaf[:i]
        rb = retrace_bounds(tree, tau, leaf)
        clasps = [tree[leaf[:k]].clasp for k in range(i, len(leaf))]
        if clasps:
            assert rb.M == max(c.a for c in clasps) and rb.m == min(c.b for c in clasps)


def test_verify_lemma1_fig4(fig4_tree):
    rep = verify_lemma1(fig4_tree, "", "0")
    assert rep.equal_ok and rep.bounds_ok
    assert rep.low_fold_len == F(1, 3) and rep.high_fold_len == 0
    rep = verify_lemma1(fig4_tree, "0", "0")
    assert rep.bounds_ok and rep.low_fold_len == 0 and rep.high_fold_len == 0


@settings(max_examples=300)
@given(st.integers(0, 2**32), st.integers(0, 8))
def test_lemma1_random_chains(seed, depth):
    tree, leaf = random_chain_tree(random.Random(seed), depth)
    for i in range(len(leaf) + 1):
        assert verify_lemma1(tree, leaf[:i], leaf).bounds_ok


def test_classify_one_step(fig4_tree):
    cls = classify_aw(fig4_tree, "", "0")
    assert cls.side == "low-wiggle"
    assert cls.retrace == Interval(F(1, 3), F(3, 4))
    assert cls.eps_bound == F(1, 3)
    cls1 = classify_aw(fig4_tree, "", "1")
    assert cls1.side == "high-wiggle" and cls1.eps_bound == F(1, 4)


def test_classify_not_aw(fig4_tree):
    fig4_tree.expand("0", ClaspChoice(0, F(1, 2)))
    with pytest.raises(NotAWError):
        classify_aw(fig4_tree, "", "01")


def test_classify_phase_end_leaves():
    tree = BingTree()
    grow(tree, SmallDisplacementStrategy(SmallDisplacement(), 1), ExpansionMode.sampled_paths(3, 2, 10**6))
    ends = [n for n in tree.nodes.values() if n.state.phases_ended]
    assert ends
    for n in ends:
        parent = tree[n.parent]
        tau = parent.id if parent.state.round is None else parent.id[: parent.state.round.start_depth]
        cls = classify_aw(tree, tau, n.id)
        assert cls.retrace.lo >= n.path.domain.lo and cls.retrace.hi <= n.path.domain.hi


def test_depth_profile_examples(fig4_tree):
    p = depth_profile(BingTree())
    assert p.count == [1] and p.max_diameter == [1] and p.max_length == [1]
    p = depth_profile(fig4_tree)
    assert p.max_diameter[1] == F(3, 4) and p.max_length[1] == F(13, 12)
    assert p.mean_diameter(1) == F(3, 4 * 2) + F(2, 3 * 2)
    assert p.max_displacement[0] == F(1, 3)
    assert p.first_depth_below(F(4, 5)) == 1


def test_profile_merge_is_order_independent(fig4_tree):
    a = depth_profile(fig4_tree)
    b = depth_profile(BingTree())
    assert a.merge(b) == b.merge(a)


def test_mode_independence():
    strat = RandomStrategy(RandomClasps(9))
    full = grow(BingTree(), strat, ExpansionMode.full(7))
    for mode in (ExpansionMode.sampled_paths(5, 4, 7), ExpansionMode.extremal(7)):
        part = grow(BingTree(), strat, mode)
        assert len(part.nodes) <= mode.node_bound()
        for sigma, node in part.nodes.items():
            ref = full.nodes[sigma]
            assert node.path == ref.path
            # unexpanded siblings carry no clasp
            assert node.clasp is None or node.clasp == ref.clasp


def test_parallel_full_matches_serial():
    strat = SmallDisplacementStrategy(SmallDisplacement())
    serial = grow(BingTree(), strat, ExpansionMode.full(6))
    par = grow(BingTree(), strat, ExpansionMode.full(6), workers=2)
    assert [n.id for n in serial.sorted_nodes()] == [n.id for n in par.sorted_nodes()]
    for s, p in zip(serial.sorted_nodes(), par.sorted_nodes()):
        assert s.path == p.path and s.clasp == p.clasp


def test_node_cap():
    tree = BingTree(node_cap=10)
    grow(tree, RandomStrategy(RandomClasps(0)), ExpansionMode.full(5))
    assert tree.capped and len(tree.nodes) <= 10


def test_max_nodes_env(monkeypatch):
    monkeypatch.delenv("BING_MAX_NODES", raising=False)
    assert max_nodes_from_env() == 2**22
    monkeypatch.setenv("BING_MAX_NODES", "17")
    assert max_nodes_from_env() == 17
    monkeypatch.setenv("BING_MAX_NODES", "0")
    with pytest.raises(ValueError):
        max_nodes_from_env()


def test_is_ancestor():
    assert is_ancestor("", "01") and is_ancestor("01", "01") and not is_ancestor("1", "01")


def test_displacement_ledger_consistent(fig4_tree):
    node = fig4_tree[""]
    assert node.displacements() == (F(1, 3), F(1, 4))
    assert fig4_tree["0"].displacements() is None
