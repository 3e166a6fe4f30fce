from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bingshrink import _core
from bingshrink import fastpath as fp
from bingshrink.bingtree import BingTree, ExpansionMode, grow
from bingshrink.plfun import diameter
from bingshrink.strategies import RandomClasps, RandomStrategy, SmallDisplacement, SmallDisplacementStrategy, to_grid

G = 1 << _core.GRID_BITS


def fresh():
    return fp.SDResult(np.zeros((fp.N_PROF, 1024), dtype=np.int64))


def path_nodes(tree, strat, mode, run_seed, index):
    """Root-to-leaf node list of one followed path, recomputed independently."""
    key = _core.path_root(run_seed, index)
    sigma = ""
    out = [tree.nodes[""]]
    while tree.nodes[sigma].clasp is not None:
        if mode == "extremal":
            c0, c1 = tree.nodes[sigma + "0"], tree.nodes[sigma + "1"]
            sigma += "1" if strat.extremal_key(c1) > strat.extremal_key(c0) else "0"
        else:
            b = _core.branch_bit(key)
            key = _core.child_key(key, b)
            sigma += str(b)
        out.append(tree.nodes[sigma])
    return out


@pytest.mark.parametrize("mode,index", [("extremal", 0), ("sampled", 0), ("sampled", 3)])
def test_engines_agree(mode, index):
    cfg = SmallDisplacement()
    strat = SmallDisplacementStrategy(cfg, 1)
    m = ExpansionMode.extremal(3000) if mode == "extremal" else ExpansionMode.sampled_paths(index + 1, 3, 3000)
    tree = grow(BingTree(), strat, m)
    nodes = path_nodes(tree, strat, mode, 3, index)

    tracked = fp.run_sd_path(cfg, mode, index, 3, 3000, 1, fresh(), True)
    q = tracked.depth_profile()
    assert len(q.count) == len(nodes)
    for k, n in enumerate(nodes):
        assert q.max_diameter[k] == diameter(n.path)
        assert q.max_length[k] == n.path.domain.length
        if n.clasp is not None:
            assert q.max_displacement[k] == max(n.displacements())

    strided = fp.run_sd_path(cfg, mode, index, 3, 3000, 1, fresh(), False, 7)
    q2 = strided.depth_profile()
    measured = [k for k in range(len(nodes)) if q2.diam_count[k]]
    assert len(measured) > len(nodes) // 7
    for k in measured:
        assert q2.max_diameter[k] == diameter(nodes[k].path)
    assert strided.final_diameters == tracked.final_diameters
    assert len(tracked.phase_ends) <= 1 and not tracked.violations


@settings(max_examples=40)
@given(st.integers(0, 2**32), st.integers(0, 2**16))
def test_random_paths_match_tree(run_seed, strategy_seed):
    depth = 12
    diams = fp.random_path_diameters(0, 3, depth, run_seed, strategy_seed)
    strat = RandomStrategy(RandomClasps(strategy_seed))
    tree = grow(BingTree(), strat, ExpansionMode.sampled_paths(3, run_seed, depth))
    for i in range(3):
        nodes = path_nodes(tree, strat, "sampled", run_seed, i)
        assert [F(int(x), G) for x in diams[i]] == [diameter(n.path) for n in nodes]


def test_random_diameters_worker_split():
    a = fp.random_diameters(50, 20, 4, 5, workers=1)
    b = fp.random_diameters(50, 20, 4, 5, workers=3)
    assert np.array_equal(a, b)
    assert np.all(a[:, 1:] <= a[:, :-1])


def test_run_sd_paths_worker_split_and_targets():
    cfg = SmallDisplacement()
    t = (F(1, 2), F(1, 4))
    a = fp.run_sd_paths(cfg, "sampled", 6, 1, 2000, targets=t)
    b = fp.run_sd_paths(cfg, "sampled", 6, 1, 2000, workers=2, targets=t)
    assert np.array_equal(a.trimmed_profile(), b.trimmed_profile())
    assert a.reach == b.reach and a.final_diameters == b.final_diameters
    st_ = a.stages_to_target()
    for j, g in enumerate(a.targets):
        assert st_[g] == max(r[j] for r in a.reach)
    with pytest.raises(ValueError):
        fp.run_sd_paths(cfg, "sampled", 2, 1, 10, targets=(F(1, 4), F(1, 2)))
    with pytest.raises(ValueError):
        fp.run_sd_paths(cfg, "sampled", fp.MAX_SD_PATHS + 1, 1, 10)


def test_first_reach_matches_dense_diameters():
    cfg = SmallDisplacement()
    targets = (F(3, 4), F(1, 2), F(3, 10))
    res = fp.run_sd_paths(cfg, "extremal", 1, 0, 4000, targets=targets, track=True)
    q = res.depth_profile()
    for j, t in enumerate(targets):
        dense = next((k for k, d in enumerate(q.max_diameter) if d < t), None)
        assert res.reach[0][j] == dense


def test_hash_selftest_parity():
    for seed in (0, 1, 2**63 + 5):
        for sigma in ("", "0", "1101"):
            key, bit, u, pr = fp.hash_selftest(seed, sigma)
            assert key == _core.node_key(seed, sigma)
            assert bit == _core.branch_bit(key)
            assert u == _core.uniform_int(key, 0)
            assert pr == _core.path_root(seed, 3)


def test_grid_targets_round_up():
    assert fp._to_grid_targets((F(1, 2),)) == (to_grid(F(1, 2)),)
    (g,) = fp._to_grid_targets((F(1, 3),))
    assert F(g, G) >= F(1, 3) > F(g - 1, G)


def test_exact_random_path_matches_kernel():
    diams = fp.random_path_diameters(0, 5, 40, 3, 4)
    for i in range(5):
        assert fp.random_path_exact(i, 40, 3, 4) == [int(x) for x in diams[i]]


def test_overflowing_random_path_falls_back():
    # path 3359 of seed 2024 outgrows the int64 grid before depth 200
    row = fp.random_path_diameters(3359, 1, 200, 2024, 2024)[0]
    assert [int(x) for x in row] == fp.random_path_exact(3359, 200, 2024, 2024)
    assert np.all(row[1:] <= row[:-1]) and row[-1] >= 0
