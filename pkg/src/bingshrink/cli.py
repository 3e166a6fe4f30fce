"""Command line front end: config files, CSV/JSON reports and SVG plots.

Usage::

    bingshrink run|verify|scale|montecarlo|compare|render --config FILE --out DIR [--set KEY=VALUE]...

Config files are line oriented ``key = value`` text.  Keys before the first
section header apply to every section; ``[run]``, ``[verify]``, ``[scale]``,
``[montecarlo]`` and ``[render]`` hold per-subcommand keys, and compare reads
one ``[compare.NAME]`` section per strategy.  ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import numbers
import os
import sys
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional

from . import experiments as ex
from .bingtree import BingTree
from .geometry import EpsSchedule
from .plfun import image
from .strategies import Bing1952, Bing1988, RandomClasps, SmallDisplacement, from_grid

SUBCOMMANDS = ("run", "verify", "scale", "montecarlo", "compare", "render")


class ConfigError(ValueError):
    def __init__(self, line: Optional[int], key: Optional[str], msg: str):
        self.line, self.key = line, key
        where = f"line {line}" if isinstance(line, int) else (line or "config")
        super().__init__(f"{where}: {key + ': ' if key else ''}{msg}")


# -- value parsers -----------------------------------------------------------------

def _frac(text: str) -> Fraction:
    return Fraction(text.strip())


def _pos_frac(text: str) -> Fraction:
    v = _frac(text)
    if not v > 0:
        raise ValueError("must be > 0")
    return v


def _pos_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise ValueError("must be > 0")
    return v


def _int_at_least(lo: int) -> Callable[[str], int]:
    def parse(text: str) -> int:
        v = int(text)
        if v < lo:
            raise ValueError(f"must be >= {lo}")
        return v
    return parse


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise ValueError("must be a 64-bit unsigned integer")
    return v


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t
    return parse


def _list(item: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        parts = [p for p in text.replace(",", " ").split() if p]
        if not parts:
            raise ValueError("empty list")
        return tuple(item(p) for p in parts)
    return parse


def _schedule(text: str) -> EpsSchedule:
    s = EpsSchedule.parse(text)
    if not s.diverges():
        raise ValueError("schedule has a convergent square sum")
    return s


def _optional_phases(text: str) -> Optional[int]:
    if text.strip().lower() in ("none", ""):
        return None
    return _int_at_least(1)(text)


STRATEGIES = ("small_displacement", "bing1952", "bing1988", "random")

KEYS: dict[str, Callable[[str], Any]] = {
    # runs
    "strategy": _choice(*STRATEGIES),
    "mode": _choice(*ex.MODES),
    "engine": _choice(*ex.ENGINES),
    "max_depth": _int_at_least(0),
    "targets": _list(_pos_frac),
    "seed": _seed,
    "count": _int_at_least(1),
    "stop_after_phases": _optional_phases,
    "until_targets": _bool,
    "workers": _int_at_least(1),
    # strategy parameters
    "eps_L": _pos_float,
    "schedule": _schedule,
    "initial_eps": _pos_float,
    "plane_count": _int_at_least(3),
    "goals": _list(_pos_frac),
    "patient_delta": _pos_frac,
    "strategy_seed": _seed,
    # output
    "decimal": _bool,
    # scale
    "eps_values": _list(_pos_float),
    "target": _pos_frac,
    "regime": _pos_float,
    "direct": _bool,
    # montecarlo
    "trials": _int_at_least(1),
    "depth": _int_at_least(0),
    # render
    "what": _choice("functions", "plane_tree"),
}

DEFAULTS: dict[str, Any] = {
    "mode": "extremal",
    "engine": "tree",
    "seed": 0,
    "count": 1,
    "stop_after_phases": None,
    "until_targets": False,
    "workers": 1,
    "targets": (),
    "decimal": False,
    "eps_values": (0.04, 0.02, 0.01),
    "target": Fraction(1, 2),
    "eps_L": 0.25,
    "regime": 0.001,
    "direct": False,
    "what": "functions",
}


@dataclass
class Section:
    name: str
    line: int
    values: dict[str, Any] = field(default_factory=dict)
    raw: dict[str, str] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)


@dataclass
class ParsedConfig:
    common: Section
    sections: dict[str, Section]

    def section(self, name: str) -> Section:
        """Common keys overlaid by the named section (which may be absent)."""
        sec = self.sections.get(name)
        out = Section(name, sec.line if sec else 0)
        for src in (self.common, sec):
            if src is not None:
                out.values.update(src.values)
                out.raw.update(src.raw)
                out.lines.update(src.lines)
        return out


def _set(sec: Section, key: str, raw: str, line) -> None:
    if key not in KEYS:
        raise ConfigError(line, key, "unknown key")
    try:
        sec.values[key] = KEYS[key](raw)
    except (ValueError, ArithmeticError) as exc:
        raise ConfigError(line, key, f"bad value {raw.strip()!r}: {exc}") from None
    sec.raw[key] = raw.strip()
    sec.lines[key] = line


def parse_config_text(text: str) -> ParsedConfig:
    common = Section("", 0)
    sections: dict[str, Section] = {}
    cur = common
    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(no, None, f"malformed section header {body!r}")
            name = body[1:-1].strip()
            base = name.split(".", 1)[0]
            if base not in SUBCOMMANDS:
                raise ConfigError(no, None, f"unknown section [{name}]")
            if name in sections:
                raise ConfigError(no, None, f"duplicate section [{name}]")
            cur = sections[name] = Section(name, no)
            continue
        if "=" not in body:
            raise ConfigError(no, None, f"expected 'key = value', got {body!r}")
        key, raw = (p.strip() for p in body.split("=", 1))
        if key in cur.values:
            raise ConfigError(no, key, "duplicate key")
        _set(cur, key, raw, no)
    return ParsedConfig(common, sections)


def apply_overrides(cfg: ParsedConfig, overrides: list[str], default_section: str) -> None:
    """Apply ``--set key=value`` or ``--set section.key=value`` overrides."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", None, f"expected key=value, got {item!r}")
        key, raw = (p.strip() for p in item.split("=", 1))
        name = default_section
        if "." in key and key.rsplit(".", 1)[0] != "":
            name, key = key.rsplit(".", 1)
        sec = cfg.sections.get(name)
        if sec is None:
            if name.split(".", 1)[0] not in SUBCOMMANDS:
                raise ConfigError("--set", key, f"unknown section [{name}]")
            sec = cfg.sections[name] = Section(name, 0)
        _set(sec, key, raw, "--set")


def _get(sec: Section, key: str, required: bool = False):
    if key in sec.values:
        return sec.values[key]
    if required or key not in DEFAULTS:
        raise ConfigError(sec.line or None, key, f"missing required key in [{sec.name or 'common'}]")
    return DEFAULTS[key]


def strategy_from(sec: Section):
    name = _get(sec, "strategy", required=True)
    allowed = {
        "small_displacement": {"eps_L", "schedule", "initial_eps"},
        "bing1952": {"plane_count", "goals"},
        "bing1988": {"patient_delta"},
        "random": {"strategy_seed"},
    }
    # eps_L doubles as a scale key, so only the other strategies' keys are rejected
    foreign = set().union(*(keys for other, keys in allowed.items() if other != name)) - {"eps_L"}
    for k in sorted(foreign & set(sec.values)):
        raise ConfigError(sec.lines[k], k, f"not a parameter of strategy {name}")
    v = sec.values
    try:
        if name == "small_displacement":
            eps = v.get("initial_eps", 0.05)
            sched = v.get("schedule", EpsSchedule.constant(eps))
            return SmallDisplacement(v.get("eps_L", 0.25), sched, eps)
        if name == "bing1952":
            return Bing1952(v.get("plane_count", 10), v.get("goals", ()))
        if name == "bing1988":
            return Bing1988(v.get("patient_delta", Fraction(1, 100)))
        return RandomClasps(v.get("strategy_seed", 0))
    except ValueError as exc:
        raise ConfigError(sec.lines.get("strategy"), "strategy", str(exc)) from None


def run_config_from(sec: Section) -> ex.RunConfig:
    strategy = strategy_from(sec)
    try:
        return ex.RunConfig(
            strategy=strategy,
            mode=_get(sec, "mode"),
            max_depth=_get(sec, "max_depth", required=True),
            targets=_get(sec, "targets"),
            seed=_get(sec, "seed"),
            count=_get(sec, "count"),
            stop_after_phases=_get(sec, "stop_after_phases"),
            workers=_get(sec, "workers"),
            engine=_get(sec, "engine"),
            until_targets=_get(sec, "until_targets"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(sec.line or None, None, str(exc)) from None


def parse_config(text: str, section: str = "run") -> ex.RunConfig:
    """Parse config text into the RunConfig of one section."""
    return run_config_from(parse_config_text(text).section(section))


def resolved(sec: Section, keys=None) -> dict[str, str]:
    """The section's effective settings, defaults included, as strings (workers excluded)."""
    out = {}
    for k in sorted(set(sec.raw) | (set(DEFAULTS) if keys is None else set(keys) & set(DEFAULTS))):
        if k == "workers":
            continue
        if k in sec.raw:
            out[k] = sec.raw[k]
        elif k in DEFAULTS and (keys is None or k in keys):
            out[k] = _fmt_default(DEFAULTS[k])
    return out


def _fmt_default(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return "none" if v is None else str(v).lower() if isinstance(v, bool) else str(v)


# workers is left out: results do not depend on it, and outputs must be byte-identical across it
RUN_KEYS = ("mode", "engine", "seed", "count", "stop_after_phases", "until_targets", "targets", "decimal")


# -- value formatting ----------------------------------------------------------------

def fmt(x, decimal: bool = False) -> str:
    """p/q for rationals (or a decimal approximation), shortest repr for floats."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, numbers.Rational) and not isinstance(x, int):
        return repr(float(x)) if decimal else str(Fraction(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _json_value(x, decimal: bool):
    if x is None or isinstance(x, (bool, int, str)):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, numbers.Rational):
        return fmt(x, decimal)
    if isinstance(x, dict):
        return {fmt(k, decimal) if not isinstance(k, str) else k: _json_value(v, decimal) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v, decimal) for v in x]
    return str(x)


def dump_json(obj, path: str, decimal: bool = False) -> None:
    text = json.dumps(_json_value(obj, decimal), sort_keys=True, indent=1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


# -- CSV -------------------------------------------------------------------------------

CSV_COLUMNS = ("sigma", "depth", "c", "d", "a", "b", "img_lo", "img_hi", "length",
               "disp_lo", "disp_hi", "phase", "eps_phase")


def node_rows(tree: BingTree, decimal: bool = False) -> list[list[str]]:
    rows = []
    for n in tree.sorted_nodes():
        dom = n.path.domain
        img = image(n.path)
        a = b = dl = dh = None
        if n.clasp is not None:
            a, b = n.clasp.a, n.clasp.b
            dl, dh = n.displacements()
        vals = [n.id, n.depth, dom.lo, dom.hi, a, b, img.lo, img.hi, dom.length, dl, dh, n.phase, n.eps_phase]
        rows.append([fmt(v, decimal) for v in vals])
    return rows


def emit_csv(report: ex.ExperimentReport, path: str, decimal: bool = False) -> None:
    """One row per materialized node; requires a tree-engine report."""
    if report.tree is None:
        raise ValueError("node CSV needs a tree-engine report")
    _write_csv(path, CSV_COLUMNS, node_rows(report.tree, decimal))


def _write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


PROFILE_COLUMNS = ("depth", "count", "diam_count", "max_diameter", "mean_diameter", "max_length",
                   "expanded", "max_displacement", "mean_displacement")


def profile_rows(report: ex.ExperimentReport, decimal: bool = False) -> list[list[str]]:
    p = report.profile
    rows = []
    for k in range(len(p.count)):
        vals = [k, p.count[k], p.diam_count[k], p.max_diameter[k], p.mean_diameter(k), p.max_length[k],
                p.expanded[k], p.max_displacement[k], p.mean_displacement(k)]
        rows.append([fmt(v, decimal) for v in vals])
    return rows


def report_json(report: ex.ExperimentReport, config: dict) -> dict:
    stages = {fmt(t): ("not reached" if d is None else d) for t, d in report.stages_to_target.items()}
    out = {
        "config": config,
        "interpretive": report.interpretive,
        "stages_to_target": stages,
        "wall_notes": report.wall_notes,
        "profile": {
            "max_diameter": report.profile.max_diameter,
            "max_length": report.profile.max_length,
            "max_displacement": report.profile.max_displacement,
        },
    }
    if report.extras:
        e = report.extras
        out["paths"] = {
            "depths": e["depths"],
            "final_diameters": e["final_diameters"],
            "max_contraction": e["max_contraction"],
            "stops": e["stops"],
            "rounds": e["rounds"],
            "phase_ends": [
                {"path": p.path, "depth": p.depth, "phase": p.phase, "eps": p.eps, "diameter": from_grid(p.diameter)}
                for p in e["phase_ends"]
            ],
            "violations": [v.describe() for v in e["violations"]],
        }
    return out


# -- SVG ---------------------------------------------------------------------------

SVG_NS = "http://www.w3.org/2000/svg"
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


def _num(x) -> str:
    return repr(round(float(x), 9))


def _svg_root(lo_x, hi_x, lo_y, hi_y, px: int = 640):
    """SVG root plus a group whose user coordinates are the plot coordinates (y up)."""
    w = float(hi_x - lo_x) or 1.0
    h = float(hi_y - lo_y) or 1.0
    pad = 0.05 * max(w, h)
    height = max(1, round(px * (h + 2 * pad) / (w + 2 * pad)))
    root = ET.Element("svg", {
        "xmlns": SVG_NS,
        "width": str(px),
        "height": str(height),
        "viewBox": f"{_num(lo_x - pad)} {_num(-hi_y - pad)} {_num(w + 2 * pad)} {_num(h + 2 * pad)}",
    })
    g = ET.SubElement(root, "g", {"transform": "scale(1,-1)"})
    return root, g, max(w, h)


def render_functions(tree: BingTree, depth: int) -> ET.Element:
    nodes = [n for n in tree.sorted_nodes() if n.depth == depth]
    if not nodes:
        raise ValueError(f"no materialized nodes at depth {depth}")
    lo = min(n.path.domain.lo for n in nodes)
    hi = max(n.path.domain.hi for n in nodes)
    root, g, span = _svg_root(lo, hi, 0, 1)
    stroke = _num(span / 300)
    for i, n in enumerate(nodes):
        pts = " ".join(f"{_num(x)},{_num(v)}" for x, v in zip(n.path.knots, n.path.knot_values))
        ET.SubElement(g, "polyline", {
            "points": pts, "fill": "none", "stroke": PALETTE[i % len(PALETTE)],
            "stroke-width": stroke, "data-sigma": n.id or "root",
        })
    return root


def _round_of(tree: BingTree, node):
    st = node.state
    return getattr(st, "round", None)


def render_plane_tree(tree: BingTree) -> ET.Element:
    nodes = tree.sorted_nodes()
    xs = [float(n.path.domain.lo) for n in nodes]
    ys = [float(n.path.domain.hi) for n in nodes]
    root, g, span = _svg_root(min(xs), max(xs), min(ys), max(ys))
    thin = _num(span / 500)
    rounds: dict[int, tuple[Any, float, float]] = {}
    for n in nodes:
        rnd = _round_of(tree, n)
        if rnd is None or rnd.bullseye is None:
            continue
        c = rnd.bullseye.center
        r = ((float(n.path.domain.lo) - c.x) ** 2 + (float(n.path.domain.hi) - c.y) ** 2) ** 0.5
        prev = rounds.get(rnd.index)
        rounds[rnd.index] = (c, min(r, prev[1]) if prev else r, max(r, prev[2]) if prev else r)
    circles = ET.SubElement(g, "g", {"fill": "none", "stroke": "#bbbbbb", "stroke-width": thin})
    for idx in sorted(rounds):
        c, rmin, rmax = rounds[idx]
        for r in sorted({rmin, rmax}):
            ET.SubElement(circles, "circle", {"cx": _num(c.x), "cy": _num(c.y), "r": _num(r)})
    edges = ET.SubElement(g, "g", {"stroke": "#444444", "stroke-width": thin})
    for n in nodes:
        if n.parent is None:
            continue
        p = tree.nodes[n.parent].path.domain
        ET.SubElement(edges, "line", {
            "x1": _num(p.lo), "y1": _num(p.hi), "x2": _num(n.path.domain.lo), "y2": _num(n.path.domain.hi),
        })
    pts = ET.SubElement(g, "g", {"fill": "#d62728"})
    for n in nodes:
        ET.SubElement(pts, "circle", {
            "cx": _num(n.path.domain.lo), "cy": _num(n.path.domain.hi), "r": _num(span / 250),
            "data-sigma": n.id or "root",
        })
    return root


def render_svg(report: ex.ExperimentReport, what: str, path: str, depth: int = 0) -> None:
    if report.tree is None:
        raise ValueError("rendering needs a tree-engine report")
    if what == "functions":
        root = render_functions(report.tree, depth)
    elif what == "plane_tree":
        root = render_plane_tree(report.tree)
    else:
        raise ValueError(f"unknown rendering {what!r}")
    ET.indent(root)
    data = ET.tostring(root, encoding="unicode")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n' + data + "\n")


# -- subcommands --------------------------------------------------------------------

def _out(args, name: str) -> str:
    return os.path.join(args.out, name)


def cmd_run(cfg: ParsedConfig, args) -> int:
    sec = cfg.section("run")
    rc = run_config_from(sec)
    dec = _get(sec, "decimal")
    report = ex.run_shrink(rc)
    conf = resolved(sec, RUN_KEYS)
    dump_json(report_json(report, conf), _out(args, "report.json"), dec)
    _write_csv(_out(args, "profile.csv"), PROFILE_COLUMNS, profile_rows(report, dec))
    if report.tree is not None:
        emit_csv(report, _out(args, "nodes.csv"), dec)
    print(f"run: {report.wall_notes}; stages {_stages_text(report)}")
    return 0


def _stages_text(report) -> str:
    return ", ".join(f"{t}: {'not reached' if d is None else d}" for t, d in report.stages_to_target.items()) or "-"


def cmd_verify(cfg: ParsedConfig, args) -> int:
    sec = cfg.section("verify")
    rc = run_config_from(sec)
    report, ver = ex.verify_run(rc)
    checks = [
        {"name": c.name, "ok": c.ok, "checked": c.checked, "first_offender": c.first_offender, "detail": c.detail}
        for c in ver.checks
    ]
    out = {"config": resolved(sec, RUN_KEYS), "ok": ver.ok, "checks": checks,
           "interpretive": report.interpretive, "wall_notes": report.wall_notes}
    dump_json(out, _out(args, "verify.json"), _get(sec, "decimal"))
    for c in ver.checks:
        status = "PASS" if c.ok else "FAIL"
        line = f"{status} {c.name} ({c.checked} checked)"
        if not c.ok:
            line += f"; first offending sigma {c.first_offender!r}: {c.detail}"
        print(line)
    return 0 if ver.ok else 1


def cmd_scale(cfg: ParsedConfig, args) -> int:
    sec = cfg.section("scale")
    rep = ex.scaling_experiment(
        _get(sec, "eps_values"), _get(sec, "target"), _get(sec, "eps_L"), _get(sec, "regime"), _get(sec, "direct"),
    )
    out = {
        "config": resolved(sec, ("eps_values", "target", "eps_L", "regime", "direct")),
        "label": rep.label,
        "series": {"eps": rep.eps_values, "stages": rep.stages, "target": rep.target, "eps_L": rep.eps_L},
        "fit": {"slope": rep.fit.slope, "intercept": rep.fit.intercept, "residuals": rep.fit.residuals},
        "increasing": rep.increasing,
        "superlinear": rep.superlinear,
        "regime": {
            "eps": rep.eps_values, "stages": rep.regime_stages, "target": rep.regime_target,
            "eps_L": rep.regime_eps,
            "fit": {"slope": rep.regime_fit.slope, "intercept": rep.regime_fit.intercept,
                    "residuals": rep.regime_fit.residuals},
            "extrapolated_stages": rep.extrapolated,
            "band": list(ex.TARGET_BAND),
            "in_band": rep.in_band,
            "direct_stages": rep.direct,
        },
    }
    dump_json(out, _out(args, "scale.json"))
    print(f"S(eps) = {dict(zip(rep.eps_values, rep.stages))}, slope {rep.fit.slope:.3f}; "
          f"extrapolated {rep.extrapolated:.3g} stages (band {ex.TARGET_BAND}, in band: {rep.in_band})")
    return 0


def cmd_montecarlo(cfg: ParsedConfig, args) -> int:
    sec = cfg.section("montecarlo")
    seed = _get(sec, "seed")
    rep = ex.monte_carlo_random(
        _get(sec, "trials", required=True), _get(sec, "depth", required=True), seed,
        sec.values.get("strategy_seed"), _get(sec, "workers"),
    )
    conf = resolved(sec, ("seed",))
    out = {"config": conf, "label": rep.label, "trials": rep.trials, "depth": rep.depth,
           "strategy_seed": rep.strategy_seed, "quantile_levels": list(ex.QUANTILES),
           "quantiles": rep.quantiles, "mean": rep.mean, "monotone": rep.monotone}
    dump_json(out, _out(args, "montecarlo.json"))
    header = ("depth",) + tuple(f"q{round(q * 100):02d}" for q in ex.QUANTILES) + ("mean",)
    rows = [[str(k)] + [repr(v) for v in qs] + [repr(m)] for k, (qs, m) in enumerate(zip(rep.quantiles, rep.mean))]
    _write_csv(_out(args, "montecarlo.csv"), header, rows)
    print(f"montecarlo: {rep.trials} paths to depth {rep.depth}; median final diameter {rep.quantiles[-1][2]:.3g}")
    return 0


def cmd_compare(cfg: ParsedConfig, args) -> int:
    names = sorted(n for n in cfg.sections if n.startswith("compare."))
    if len(names) < 2:
        raise ConfigError(None, None, "compare needs at least two [compare.NAME] sections")
    base = cfg.section("compare")
    runs = []
    for n in names:
        sec = cfg.section(n)
        for k, v in base.values.items():
            if k not in cfg.sections[n].values:
                sec.values[k], sec.raw[k] = v, base.raw[k]
        runs.append((n.split(".", 1)[1], sec, run_config_from(sec)))
    rows = ex.compare_strategies([r[2] for r in runs])
    dec = _get(base, "decimal")
    targets = sorted({t for r in rows for t in r.stages_to_target}, reverse=True)
    header = ["name", "strategy", "interpretive"] + [f"stages<{t}" for t in targets] + [
        "max_displacement", "max_length", "eps_bound", "within_eps"]
    table = []
    for (name, _, _), row in zip(runs, rows):
        st = [row.stages_to_target.get(t, "") for t in targets]
        vals = [name, row.strategy, row.interpretive] + ["not reached" if s is None else s for s in st] + [
            row.max_displacement, row.max_length, row.eps_bound, row.within_eps]
        table.append([fmt(v, dec) for v in vals])
    _write_csv(_out(args, "compare.csv"), header, table)
    out = {"config": {name: resolved(sec, RUN_KEYS) for name, sec, _ in runs}, "header": header, "rows": table}
    dump_json(out, _out(args, "compare.json"))
    for r in table:
        print(", ".join(r))
    return 0


def cmd_render(cfg: ParsedConfig, args) -> int:
    sec = cfg.section("render")
    rc = run_config_from(sec)
    if rc.engine != "tree":
        raise ConfigError(sec.lines.get("engine"), "engine", "render needs the tree engine")
    report = ex.run_shrink(rc)
    what = _get(sec, "what")
    depth = sec.values.get("depth", max(len(k) for k in report.tree.nodes))
    path = _out(args, f"{what}.svg")
    render_svg(report, what, path, depth)
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "run": cmd_run, "verify": cmd_verify, "scale": cmd_scale,
    "montecarlo": cmd_montecarlo, "compare": cmd_compare, "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bingshrink", description="Shrink experiments for the 1D Bing model.")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="config file (key = value lines)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; SECTION.KEY=VALUE targets a section")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config_text(text)
        apply_overrides(cfg, args.set, args.command)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bingshrink: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"bingshrink {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
