"""Measurement harness: shrink runs, stage-count scaling, random-clasp Monte Carlo.

Every report is a pure function of its config; nothing here reads clocks or
global random state.  Two engines back the runs: the exact tree engine
(``engine="tree"``, every node materialized with rational data) and the
compiled path engine (``engine="fast"``) for deep small-displacement and
random-clasp paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from . import _core, fastpath
from .bingtree import (
    BingTree,
    DepthProfile,
    ExpansionMode,
    NotAWError,
    classify_aw,
    depth_profile,
    grow,
    verify_lemma1,
)
from .geometry import EpsSchedule
from .plfun import diameter, image, image_on
from .strategies import (
    Bing1952,
    Bing1988,
    RandomClasps,
    SmallDisplacement,
    StrategyConfig,
    from_grid,
    make_strategy,
)

MODES = ("full", "sampled", "extremal")
ENGINES = ("tree", "fast")


@dataclass(frozen=True)
class RunConfig:
    strategy: StrategyConfig = field(default_factory=SmallDisplacement)
    mode: str = "extremal"
    max_depth: int = 40
    targets: tuple[Fraction, ...] = ()
    seed: int = 0
    count: int = 1  # sampled paths
    stop_after_phases: Optional[int] = None
    workers: int = 1
    engine: str = "tree"
    until_targets: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        targets = tuple(Fraction(t) for t in self.targets)
        if any(not 0 < t <= 1 for t in targets):
            raise ValueError("targets must lie in (0, 1]")
        if any(t2 >= t1 for t1, t2 in zip(targets, targets[1:])):
            raise ValueError("targets must be strictly decreasing")
        object.__setattr__(self, "targets", targets)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.mode == "sampled" and self.count < 1:
            raise ValueError("sampled mode needs count >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.stop_after_phases is not None and self.stop_after_phases < 1:
            raise ValueError("stop_after_phases must be >= 1")
        if self.engine == "fast":
            sd = isinstance(self.strategy, SmallDisplacement)
            rnd = isinstance(self.strategy, RandomClasps)
            if not (sd and self.mode in ("sampled", "extremal") or rnd and self.mode == "sampled"):
                raise ValueError("the fast engine runs small-displacement paths and sampled random paths only")

    def expansion_mode(self) -> ExpansionMode:
        if self.mode == "full":
            return ExpansionMode.full(self.max_depth)
        if self.mode == "sampled":
            return ExpansionMode.sampled_paths(self.count, self.seed, self.max_depth)
        return ExpansionMode.extremal(self.max_depth)


@dataclass
class ExperimentReport:
    config: RunConfig
    profile: DepthProfile
    stages_to_target: dict[Fraction, Optional[int]]
    wall_notes: dict[str, Any]
    tree: Optional[BingTree] = None
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def displacement_stats(self) -> list[tuple[int, Optional[Fraction], Optional[Fraction]]]:
        """(depth, max, mean) displacement over the clasps chosen at each depth."""
        p = self.profile
        return [(k, p.max_displacement[k], p.mean_displacement(k)) for k in range(len(p.count))]

    @property
    def interpretive(self) -> bool:
        return isinstance(self.config.strategy, Bing1988)


def _stages_from_profile(profile: DepthProfile, targets) -> dict[Fraction, Optional[int]]:
    return {t: profile.first_depth_below(t) for t in targets}


def run_shrink(cfg: RunConfig) -> ExperimentReport:
    """Expand per config and record the profile and first depth below each target."""
    if cfg.engine == "fast":
        if isinstance(cfg.strategy, RandomClasps):
            return _run_random_fast(cfg)
        return _run_sd_fast(cfg)
    strategy = make_strategy(cfg.strategy, cfg.stop_after_phases)
    mode = cfg.expansion_mode()
    tree = BingTree(mode)
    grow(tree, strategy, mode, workers=cfg.workers)
    prof = depth_profile(tree)
    notes = {
        "engine": "tree",
        "nodes_materialized": len(tree.nodes),
        "node_bound": mode.node_bound(),
        "capped": tree.capped,
        "interpretive": getattr(strategy, "interpretive", False),
    }
    return ExperimentReport(cfg, prof, _stages_from_profile(prof, cfg.targets), notes, tree)


def _run_sd_fast(cfg: RunConfig) -> ExperimentReport:
    res = fastpath.run_sd_paths(
        cfg.strategy, cfg.mode, cfg.count, cfg.seed, cfg.max_depth, cfg.stop_after_phases,
        cfg.workers, cfg.targets, until_targets=cfg.until_targets,
    )
    grid_targets = fastpath._to_grid_targets(cfg.targets)
    raw = res.stages_to_target()
    stages = {t: raw[g] for t, g in zip(cfg.targets, grid_targets)}
    nodes = int(res.trimmed_profile()[fastpath.P_COUNT].sum())
    notes = {
        "engine": "fast",
        "nodes_materialized": 0,
        "path_nodes_visited": nodes,
        "paths": len(res.depths),
        "capped": False,
        "interpretive": False,
    }
    extras = {
        "depths": res.depths,
        "final_diameters": [from_grid(x) for x in res.final_diameters],
        "phase_ends": res.phase_ends,
        "violations": res.violations,
        "max_contraction": res.max_contraction,
        "stops": res.stops,
        "rounds": res.rounds,
    }
    return ExperimentReport(cfg, res.depth_profile(), stages, notes, None, extras)


def _run_random_fast(cfg: RunConfig) -> ExperimentReport:
    diams = fastpath.random_diameters(cfg.count, cfg.max_depth, cfg.seed, cfg.strategy.seed, cfg.workers)
    prof = DepthProfile()
    g = 1 << _core.GRID_BITS
    prof._grow(cfg.max_depth)
    for k in range(cfg.max_depth + 1):
        col = diams[:, k]
        prof.count[k] = prof.diam_count[k] = len(col)
        prof.max_diameter[k] = Fraction(int(col.max()), g)
        prof.min_diameter[k] = Fraction(int(col.min()), g)
        prof.sum_diameter[k] = Fraction(sum(int(x) for x in col), g)
    notes = {
        "engine": "fast",
        "nodes_materialized": 0,
        "path_nodes_visited": cfg.count * (cfg.max_depth + 1),
        "paths": cfg.count,
        "capped": False,
        "interpretive": False,
    }
    return ExperimentReport(cfg, prof, _stages_from_profile(prof, cfg.targets), notes)


# -- verification -----------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    ok: bool
    checked: int
    first_offender: Optional[str] = None  # sigma of the first failing node
    detail: str = ""


@dataclass
class VerifyReport:
    config: RunConfig
    checks: list[CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


class _Check:
    def __init__(self, name: str):
        self.res = CheckResult(name, True, 0)

    def __call__(self, ok: bool, sigma: str, detail: str = "") -> None:
        self.res.checked += 1
        if not ok and self.res.ok:
            self.res.ok = False
            self.res.first_offender = sigma
            self.res.detail = detail


def _round_start(tree: BingTree, node) -> Optional[str]:
    """Sigma of the node where the round that produced ``node`` began."""
    if node.parent is None:
        return None
    parent = tree.nodes[node.parent]
    rnd = parent.state.round
    return parent.id if rnd is None else parent.id[: rnd.start_depth]


def verify_tree(report: ExperimentReport, aw_tol=Fraction(0)) -> list[CheckResult]:
    """Invariant checks over a materialized tree; ordering is by (depth, sigma)."""
    tree = report.tree
    cfg = report.config
    nodes = tree.sorted_nodes()
    nesting = _Check("image nesting")
    doubling = _Check("length doubling")
    lemma = _Check("lemma 1 on root-to-leaf chains")
    for node in nodes:
        if node.parent is not None:
            parent = tree.nodes[node.parent]
            nesting(image(parent.path).covers(image(node.path)), node.id)
        if node.clasp is not None:
            c0, c1 = tree.nodes[node.id + "0"], tree.nodes[node.id + "1"]
            total = c0.path.domain.length + c1.path.domain.length
            doubling(total == 2 * node.path.domain.length, node.id)
        else:
            rep = verify_lemma1(tree, "", node.id)
            lemma(rep.bounds_ok, node.id)
    checks = [nesting.res, doubling.res, lemma.res]
    sd = cfg.strategy
    if isinstance(sd, SmallDisplacement):
        length = _Check("domain length < 1 + eps_L")
        disp = _Check("displacement < eps_i and < eps_phase")
        contraction = _Check("retrace contraction < 2/3")
        phase_end = _Check("phase-end diameter < 2 eps_phase")
        aw = _Check("phase-end leaves classify as [A, eps-W]")
        bound = 1 + Fraction(sd.eps_L)
        for node in nodes:
            length(node.path.domain.length < bound, node.id)
            st = node.state
            if node.clasp is not None:
                d0, d1 = node.displacements()
                eps_i = sd.schedule.term(node.depth + 1)
                e = Fraction(min(eps_i, st.eps_phase))
                disp(max(d0, d1) < e, node.id, f"displacement {float(max(d0, d1))} vs {float(e)}")
            if st.stop is not None:
                contraction(3 * st.stop.new_length < 2 * st.stop.old_length, node.id)
            for _, e in st.phases_ended:
                phase_end(diameter(node.path) < 2 * Fraction(e), node.id)
            if st.phases_ended:
                tau = _round_start(tree, node)
                try:
                    cls = classify_aw(tree, tau, node.id, aw_tol)
                    wl = image_on(node.path, cls.wiggle).length
                    aw(wl <= cls.eps_bound, node.id, f"wiggle image {float(wl)} > {float(cls.eps_bound)}")
                except NotAWError as exc:
                    aw(False, node.id, str(exc))
        checks += [length.res, disp.res, contraction.res, phase_end.res, aw.res]
    if isinstance(sd, Bing1952):
        extent = _Check("extent = 1 - k/n until the 2/n floor")
        n = sd.plane_count
        for node in nodes:
            k = node.depth
            if k <= n - 2:
                extent(diameter(node.path) == 1 - Fraction(k, n), node.id)
        checks.append(extent.res)
    return checks


def verify_fast(report: ExperimentReport) -> list[CheckResult]:
    """Checks recorded by the compiled engine while following paths."""
    ex = report.extras
    kinds = {
        "domain length < 1 + eps_L": "domain length >= 1 + eps_L",
        "displacement < eps_i and < eps_phase": "displacement >= eps",
        "retrace contraction < 2/3": "retrace contraction >= 2/3",
        "phase-end diameter < 2 eps_phase": "end diameter >= 2 eps",
    }
    out = []
    for name, marker in kinds.items():
        bad = [v for v in ex["violations"] if marker in v.check]
        res = CheckResult(name, not bad, sum(report.profile.count))
        if bad:
            res.first_offender = bad[0].sigma
            res.detail = bad[0].describe()
        out.append(res)
    return out


def verify_run(cfg: RunConfig) -> tuple[ExperimentReport, VerifyReport]:
    report = run_shrink(cfg)
    checks = verify_fast(report) if cfg.engine == "fast" else verify_tree(report)
    if report.wall_notes.get("capped"):
        checks.append(CheckResult("node cap not hit", False, 0, detail="BING_MAX_NODES reached"))
    return report, VerifyReport(cfg, checks)


# -- Question 1: stage-count scaling ------------------------------------------

@dataclass
class LogLogFit:
    slope: float
    intercept: float
    residuals: list[float]  # log10 residual per point

    def predict(self, x: float) -> float:
        return 10 ** (self.intercept + self.slope * math.log10(x))


def loglog_fit(xs, ys) -> LogLogFit:
    if len(xs) < 3:
        raise ValueError("a log-log fit needs at least 3 points")
    lx = np.log10(np.asarray(xs, dtype=float))
    ly = np.log10(np.asarray(ys, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + intercept)
    return LogLogFit(float(slope), float(intercept), [float(r) for r in res])


def extremal_stages(eps: float, target, eps_L: float, max_depth: int = 10**10) -> Optional[int]:
    """Stages for the extremal small-displacement path to shrink below ``target``."""
    sd = SmallDisplacement(eps_L, EpsSchedule.constant(eps), eps)
    cfg = RunConfig(sd, "extremal", max_depth, (Fraction(target),), engine="fast", until_targets=True)
    return run_shrink(cfg).stages_to_target[Fraction(target)]


TARGET_BAND = (1e10, 1e14)


@dataclass
class ScalingReport:
    eps_values: list[float]
    target: Fraction
    eps_L: float
    stages: list[int]
    fit: LogLogFit
    increasing: bool
    superlinear: list[bool]  # S(eps/2) >= 2 S(eps) for consecutive halvings
    regime_eps: float
    regime_target: Fraction
    regime_stages: list[int]
    regime_fit: LogLogFit
    extrapolated: float
    in_band: bool
    direct: Optional[int] = None
    label: str = "order-of-magnitude gate; the exponent is reported, not asserted"


def scaling_experiment(
    eps_values=(0.04, 0.02, 0.01),
    target=Fraction(1, 2),
    eps_L: float = 0.25,
    regime: float = 0.001,
    direct: bool = False,
) -> ScalingReport:
    """Stage counts S(eps) on extremal paths, a log-log fit, and an extrapolation.

    The extrapolation reruns the same eps values in the target regime
    (diameter ``regime``, eps_L = ``regime``) and extends that fit down to
    eps = ``regime``.  ``direct`` also runs that regime outright.
    """
    eps_values = [float(e) for e in eps_values]
    if any(e2 >= e1 for e1, e2 in zip(eps_values, eps_values[1:])):
        raise ValueError("eps_values must be decreasing")
    target = Fraction(target)
    stages = [extremal_stages(e, target, eps_L) for e in eps_values]
    if any(s is None for s in stages):
        raise RuntimeError("an extremal run did not reach the target")
    fit = loglog_fit(eps_values, stages)
    increasing = all(s2 > s1 for s1, s2 in zip(stages, stages[1:]))
    superlinear = [
        s2 >= 2 * s1
        for (e1, s1), (e2, s2) in zip(zip(eps_values, stages), zip(eps_values[1:], stages[1:]))
        if math.isclose(e2, e1 / 2)
    ]
    rt = Fraction(regime).limit_denominator(10**9)
    regime_stages = [extremal_stages(e, rt, regime) for e in eps_values]
    if any(s is None for s in regime_stages):
        raise RuntimeError("a regime run did not reach the target")
    rfit = loglog_fit(eps_values, regime_stages)
    extrapolated = rfit.predict(regime)
    report = ScalingReport(
        eps_values, target, eps_L, stages, fit, increasing, superlinear,
        regime, rt, regime_stages, rfit, extrapolated,
        TARGET_BAND[0] <= extrapolated <= TARGET_BAND[1],
    )
    if direct:
        report.direct = extremal_stages(regime, rt, regime)
    return report


# -- Question 2: random clasps ----------------------------------------------------

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass
class MonteCarloReport:
    trials: int
    depth: int
    seed: int
    strategy_seed: int
    quantiles: list[list[float]]  # per depth, one value per QUANTILES entry
    mean: list[float]
    monotone: bool  # every path's diameters are non-increasing
    label: str = "finite-depth statistics only; no shrink claim"


def monte_carlo_random(trials: int, depth: int, seed: int, strategy_seed: Optional[int] = None,
                       workers: int = 1) -> MonteCarloReport:
    """Image-diameter quantiles per depth over independently sampled random-clasp paths.

    Each path keeps only its O(depth) domain history.  ``seed`` picks the
    paths, ``strategy_seed`` (default ``seed``) the clasps.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sseed = seed if strategy_seed is None else strategy_seed
    diams = fastpath.random_diameters(trials, depth, seed, sseed, workers)
    monotone = bool(np.all(diams[:, 1:] <= diams[:, :-1]))
    x = diams.astype(np.float64) * _core.INV_SCALE
    q = np.quantile(x, QUANTILES, axis=0).T
    mean = x.mean(axis=0)
    return MonteCarloReport(
        trials, depth, seed, sseed,
        [[float(v) for v in row] for row in q], [float(v) for v in mean], monotone,
    )


# -- comparisons ------------------------------------------------------------------

@dataclass
class ComparisonRow:
    strategy: str
    interpretive: bool
    stages_to_target: dict[Fraction, Optional[int]]
    max_displacement: Optional[Fraction]
    max_length: Optional[Fraction]
    eps_bound: Optional[float]  # displacement budget, when the strategy has one
    within_eps: Optional[bool]


def strategy_name(cfg: StrategyConfig) -> str:
    return make_strategy(cfg).name


def compare_strategies(cfgs: list[RunConfig]) -> list[ComparisonRow]:
    """One aligned row per config: target stages, max displacement and max length."""
    if len(cfgs) < 2:
        raise ValueError("compare needs at least two configs")
    rows = []
    for cfg in cfgs:
        rep = run_shrink(cfg)
        p = rep.profile
        disps = [x for x in p.max_displacement if x is not None]
        lens = [x for x in p.max_length if x is not None]
        md = max(disps) if disps else None
        bound = None
        within = None
        if isinstance(cfg.strategy, SmallDisplacement):
            bound = cfg.strategy.initial_eps  # every eps_phase is at most this
            within = md is None or md < Fraction(bound)
        rows.append(ComparisonRow(
            strategy_name(cfg.strategy), rep.interpretive, rep.stages_to_target,
            md, max(lens) if lens else None, bound, within,
        ))
    return rows
