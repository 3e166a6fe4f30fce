"""The binary tree of folded paths, its expansion engine and Lemma-style checks.

Node ids are bit strings (``""`` is the root).  A node's data depends only on
its id and the strategy, so full, sampled and extremal expansion materialize
identical nodes wherever they overlap.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

from . import _core
from .plfun import (
    ClaspChoice,
    FoldedPath,
    Interval,
    diameter,
    equal_on,
    fold_daughters,
    identity_path,
    image_on,
)

NodeId = str

DEFAULT_MAX_NODES = 1 << 22


class TreeError(ValueError):
    pass


class NotAncestorError(TreeError):
    pass


class NotAWError(TreeError):
    pass


def check_sigma(sigma: str) -> str:
    if any(ch not in "01" for ch in sigma):
        raise TreeError(f"node id {sigma!r} is not a bit string")
    return sigma


def is_ancestor(tau: NodeId, tau_prime: NodeId) -> bool:
    """True when tau is tau_prime or one of its ancestors."""
    return tau_prime.startswith(tau)


def max_nodes_from_env() -> int:
    raw = os.environ.get("BING_MAX_NODES")
    if raw is None or raw.strip() == "":
        return DEFAULT_MAX_NODES
    value = int(raw)
    if value < 1:
        raise ValueError("BING_MAX_NODES must be positive")
    return value


@dataclass
class TreeNode:
    id: NodeId
    path: FoldedPath
    clasp: Optional[ClaspChoice] = None
    parent: Optional[NodeId] = None
    state: Any = None
    phase: Optional[int] = None
    eps_phase: Optional[float] = None

    @property
    def depth(self) -> int:
        return len(self.id)

    @property
    def expanded(self) -> bool:
        return self.clasp is not None

    def displacements(self) -> Optional[tuple[Fraction, Fraction]]:
        if self.clasp is None:
            return None
        return self.clasp.displacements(self.path.domain)


@dataclass(frozen=True)
class ExpansionMode:
    kind: str  # "full" | "sampled" | "extremal"
    max_depth: int
    count: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("full", "sampled", "extremal"):
            raise ValueError(f"unknown expansion mode {self.kind!r}")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.kind == "sampled" and self.count < 1:
            raise ValueError("sampled mode needs count >= 1")

    @classmethod
    def full(cls, max_depth: int) -> "ExpansionMode":
        return cls("full", max_depth)

    @classmethod
    def sampled_paths(cls, count: int, seed: int, max_depth: int) -> "ExpansionMode":
        return cls("sampled", max_depth, count, seed)

    @classmethod
    def extremal(cls, max_depth: int) -> "ExpansionMode":
        return cls("extremal", max_depth)

    def node_bound(self) -> int:
        """Upper bound on materialized nodes (siblings are materialized with each expansion)."""
        if self.kind == "full":
            return 2 ** (self.max_depth + 1) - 1
        if self.kind == "sampled":
            return 1 + 2 * self.count * self.max_depth
        return 1 + 2 * self.max_depth


class BingTree:
    def __init__(self, mode: Optional[ExpansionMode] = None, node_cap: Optional[int] = None):
        self.nodes: dict[NodeId, TreeNode] = {"": TreeNode("", identity_path())}
        self.expansion_mode = mode
        self.node_cap = node_cap if node_cap is not None else max_nodes_from_env()
        self.capped = False
        # ids on followed paths (sampled and extremal growth); None means every node counts
        self.followed: Optional[set[NodeId]] = None

    @property
    def root(self) -> TreeNode:
        return self.nodes[""]

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, sigma: NodeId) -> TreeNode:
        try:
            return self.nodes[sigma]
        except KeyError:
            raise TreeError(f"no node {sigma!r}") from None

    def expand(self, sigma: NodeId, clasp: ClaspChoice) -> tuple[NodeId, NodeId]:
        node = self[sigma]
        if node.clasp is not None:
            raise TreeError(f"node {sigma!r} is already expanded")
        p0, p1 = fold_daughters(node.path, clasp)
        node.clasp = clasp
        ids = (sigma + "0", sigma + "1")
        self.nodes[ids[0]] = TreeNode(ids[0], p0, parent=sigma)
        self.nodes[ids[1]] = TreeNode(ids[1], p1, parent=sigma)
        return ids

    def sorted_nodes(self) -> list[TreeNode]:
        return [self.nodes[k] for k in sorted(self.nodes, key=lambda s: (len(s), s))]


# -- expansion engine -----------------------------------------------------------

def _expand_with(tree: BingTree, node: TreeNode, strategy) -> tuple[TreeNode, TreeNode]:
    clasp, s0, s1 = strategy.children(node, node.depth)
    i0, i1 = tree.expand(node.id, clasp)
    out = []
    for sid, st in ((i0, s0), (i1, s1)):
        child = tree.nodes[sid]
        child.state = st
        child.phase, child.eps_phase = strategy.phase_info(child)
        out.append(child)
    return out[0], out[1]


def _room(tree: BingTree) -> bool:
    if len(tree.nodes) + 2 > tree.node_cap:
        tree.capped = True
        return False
    return True


def _grow_full_serial(tree: BingTree, strategy, frontier: list[TreeNode], max_depth: int) -> None:
    level = frontier
    while level:
        nxt = []
        for node in level:
            if node.depth >= max_depth or strategy.done(node):
                continue
            if not _room(tree):
                return
            nxt.extend(_expand_with(tree, node, strategy))
        level = nxt


def _subtree_job(args):
    strategy, node, max_depth, cap = args
    sub = BingTree(node_cap=cap)
    sub.nodes = {node.id: node}
    _grow_full_serial(sub, strategy, [node], max_depth)
    return [sub.nodes[k] for k in sorted(sub.nodes)], sub.capped


def grow(tree: BingTree, strategy, mode: Optional[ExpansionMode] = None, workers: int = 1) -> BingTree:
    """Expand ``tree`` according to ``mode`` using ``strategy`` for every clasp."""
    mode = mode or tree.expansion_mode
    if mode is None:
        raise TreeError("no expansion mode given")
    tree.expansion_mode = mode
    root = tree.root
    if root.state is None:
        root.state = strategy.root_state()
        root.phase, root.eps_phase = strategy.phase_info(root)

    if mode.kind == "full":
        fits = mode.node_bound() <= tree.node_cap
        split = 0
        while (1 << split) < 2 * workers:
            split += 1
        if workers > 1 and fits and mode.max_depth > split:
            _grow_full_serial(tree, strategy, [root], split)
            frontier = [n for n in tree.sorted_nodes() if n.depth == split]
            jobs = [(strategy, n, mode.max_depth, tree.node_cap) for n in frontier]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_subtree_job, jobs))
            # merge in frontier order so insertion is independent of scheduling
            for nodes, capped in results:
                for n in nodes:
                    tree.nodes[n.id] = n
                tree.capped |= capped
        else:
            _grow_full_serial(tree, strategy, [root], mode.max_depth)
        return tree

    tree.followed = tree.followed or set()
    tree.followed.add("")
    if mode.kind == "sampled":
        for i in range(mode.count):
            key = _core.path_root(mode.seed, i)
            node = root
            while node.depth < mode.max_depth and not strategy.done(node):
                if node.clasp is None:
                    if not _room(tree):
                        return tree
                    _expand_with(tree, node, strategy)
                bit = _core.branch_bit(key)
                key = _core.child_key(key, bit)
                node = tree.nodes[node.id + str(bit)]
                tree.followed.add(node.id)
        return tree

    node = root
    while node.depth < mode.max_depth and not strategy.done(node):
        if node.clasp is None:
            if not _room(tree):
                return tree
            _expand_with(tree, node, strategy)
        c0, c1 = tree.nodes[node.id + "0"], tree.nodes[node.id + "1"]
        node = c1 if strategy.extremal_key(c1) > strategy.extremal_key(c0) else c0
        tree.followed.add(node.id)
    return tree


# -- Lemma 1 machinery ----------------------------------------------------------

@dataclass(frozen=True)
class RetraceBounds:
    M: Fraction
    m: Fraction

    @property
    def valid(self) -> bool:
        return self.M <= self.m


def _chain(tree: BingTree, tau: NodeId, tau_prime: NodeId) -> list[TreeNode]:
    if not is_ancestor(tau, tau_prime):
        raise NotAncestorError(f"{tau!r} is not an ancestor of {tau_prime!r}")
    tree[tau_prime]
    chain = [tree[tau_prime[:k]] for k in range(len(tau), len(tau_prime))]
    for n in chain:
        if n.clasp is None:
            raise TreeError(f"node {n.id!r} on the chain is not expanded")
    return chain


def retrace_bounds(tree: BingTree, tau: NodeId, tau_prime: NodeId) -> RetraceBounds:
    chain = _chain(tree, tau, tau_prime)
    if not chain:
        dom = tree[tau].path.domain
        return RetraceBounds(dom.lo, dom.hi)
    return RetraceBounds(max(n.clasp.a for n in chain), min(n.clasp.b for n in chain))


def _chain_displacements(chain: list[TreeNode]) -> tuple[Fraction, Fraction]:
    lo = max((n.clasp.a - n.path.domain.lo for n in chain), default=Fraction(0))
    hi = max((n.path.domain.hi - n.clasp.b for n in chain), default=Fraction(0))
    return lo, hi


@dataclass(frozen=True)
class Lemma1Report:
    equal_ok: bool
    low_fold_len: Fraction
    high_fold_len: Fraction
    bounds_ok: bool
    M: Fraction
    m: Fraction
    max_low_disp: Fraction
    max_high_disp: Fraction


def verify_lemma1(tree: BingTree, tau: NodeId, tau_prime: NodeId) -> Lemma1Report:
    """Check restriction agreement on [M, m] and both end-fold image bounds.

    When M > m the agreement claim is vacuous; the end-fold intervals are
    clipped to the descendant's domain.
    """
    chain = _chain(tree, tau, tau_prime)
    rb = retrace_bounds(tree, tau, tau_prime)
    f = tree[tau_prime].path
    g = tree[tau].path
    dom = f.domain
    if rb.M <= rb.m:
        iv = Interval(rb.M, rb.m)
        equal_ok = dom.covers(iv) and g.domain.covers(iv) and equal_on(f, g, iv)
    else:
        equal_ok = True
    if rb.M >= dom.lo:
        low = image_on(f, Interval(dom.lo, min(rb.M, dom.hi))).length
    else:
        low = Fraction(0)
    if rb.m <= dom.hi:
        high = image_on(f, Interval(max(rb.m, dom.lo), dom.hi)).length
    else:
        high = Fraction(0)
    dlo, dhi = _chain_displacements(chain)
    ok = equal_ok and low <= dlo and high <= dhi
    return Lemma1Report(equal_ok, low, high, ok, rb.M, rb.m, dlo, dhi)


@dataclass(frozen=True)
class AWClassification:
    side: str  # "low-wiggle" | "high-wiggle"
    retrace: Interval
    wiggle: Interval
    eps_bound: Fraction


def classify_aw(tree: BingTree, tau: NodeId, tau_prime: NodeId, tol=0) -> AWClassification:
    """Split f_tau' into a retrace part [M, m] and a wiggle at one end.

    When M > m the retrace part is empty (a point at the retrace end) and the
    whole domain is wiggle.  ``tol`` relaxes the end-point equalities for
    grid-quantized geometric runs.
    """
    chain = _chain(tree, tau, tau_prime)
    rb = retrace_bounds(tree, tau, tau_prime)
    dom = tree[tau_prime].path.domain
    tol = Fraction(tol)
    dlo, dhi = _chain_displacements(chain)
    if abs(dom.lo - rb.M) <= tol:
        if rb.M > rb.m:
            return AWClassification("high-wiggle", Interval(dom.lo, dom.lo), dom, dhi)
        return AWClassification("high-wiggle", Interval(rb.M, rb.m), Interval(rb.m, dom.hi), dhi)
    if abs(dom.hi - rb.m) <= tol:
        if rb.M > rb.m:
            return AWClassification("low-wiggle", Interval(dom.hi, dom.hi), dom, dlo)
        return AWClassification("low-wiggle", Interval(rb.M, rb.m), Interval(dom.lo, rb.M), dlo)
    raise NotAWError(
        f"{tau_prime!r}: neither c = M ({dom.lo} vs {rb.M}) nor d = m ({dom.hi} vs {rb.m})"
    )


# -- profiles -------------------------------------------------------------------

@dataclass
class DepthProfile:
    """Per-depth aggregates; every list is indexed by depth from 0.

    ``diam_count`` counts the nodes whose image was measured; it equals
    ``count`` except for strided profiles from the compiled engine.
    """

    count: list[int] = field(default_factory=list)
    diam_count: list[int] = field(default_factory=list)
    max_diameter: list[Fraction] = field(default_factory=list)
    min_diameter: list[Fraction] = field(default_factory=list)
    sum_diameter: list[Fraction] = field(default_factory=list)
    max_length: list[Fraction] = field(default_factory=list)
    expanded: list[int] = field(default_factory=list)
    max_displacement: list[Fraction] = field(default_factory=list)
    sum_displacement: list[Fraction] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.count) - 1

    def _grow(self, k: int) -> None:
        while len(self.count) <= k:
            self.count.append(0)
            self.diam_count.append(0)
            self.max_diameter.append(None)
            self.min_diameter.append(None)
            self.sum_diameter.append(Fraction(0))
            self.max_length.append(None)
            self.expanded.append(0)
            self.max_displacement.append(None)
            self.sum_displacement.append(Fraction(0))

    def add(self, k: int, diam, length, disp=None) -> None:
        self._grow(k)
        self.count[k] += 1
        self.diam_count[k] += 1
        self.max_diameter[k] = diam if self.max_diameter[k] is None else max(self.max_diameter[k], diam)
        self.min_diameter[k] = diam if self.min_diameter[k] is None else min(self.min_diameter[k], diam)
        self.sum_diameter[k] += diam
        self.max_length[k] = length if self.max_length[k] is None else max(self.max_length[k], length)
        if disp is not None:
            self.expanded[k] += 1
            self.max_displacement[k] = (
                disp if self.max_displacement[k] is None else max(self.max_displacement[k], disp)
            )
            self.sum_displacement[k] += disp

    def merge(self, other: "DepthProfile") -> "DepthProfile":
        """Combine two profiles (order independent)."""
        out = DepthProfile()
        out._grow(max(self.depth, other.depth))

        def mx(x, y):
            return y if x is None else x if y is None else max(x, y)

        def mn(x, y):
            return y if x is None else x if y is None else min(x, y)

        for src in (self, other):
            for k in range(len(src.count)):
                out.count[k] += src.count[k]
                out.diam_count[k] += src.diam_count[k]
                out.max_diameter[k] = mx(out.max_diameter[k], src.max_diameter[k])
                out.min_diameter[k] = mn(out.min_diameter[k], src.min_diameter[k])
                out.sum_diameter[k] += src.sum_diameter[k]
                out.max_length[k] = mx(out.max_length[k], src.max_length[k])
                out.expanded[k] += src.expanded[k]
                out.max_displacement[k] = mx(out.max_displacement[k], src.max_displacement[k])
                out.sum_displacement[k] += src.sum_displacement[k]
        return out

    def mean_diameter(self, k: int) -> Optional[Fraction]:
        return self.sum_diameter[k] / self.diam_count[k] if self.diam_count[k] else None

    def mean_displacement(self, k: int) -> Optional[Fraction]:
        return self.sum_displacement[k] / self.expanded[k] if self.expanded[k] else None

    def first_depth_below(self, target) -> Optional[int]:
        for k, v in enumerate(self.max_diameter):
            if v is not None and self.diam_count[k] and v < target:
                return k
        return None


def depth_profile(tree: BingTree) -> DepthProfile:
    """Per-depth statistics; path-grown trees count followed nodes only, not their unexpanded siblings."""
    prof = DepthProfile()
    for node in tree.sorted_nodes():
        if tree.followed is not None and node.id not in tree.followed:
            continue
        disp = None
        if node.clasp is not None:
            d0, d1 = node.displacements()
            disp = max(d0, d1)
        prof.add(node.depth, diameter(node.path), node.path.domain.length, disp)
    return prof
