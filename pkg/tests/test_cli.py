import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from fractions import Fraction as F

import pytest

from bingshrink import cli
from bingshrink import experiments as ex
from bingshrink.bingtree import BingTree
from bingshrink.geometry import EpsSchedule
from bingshrink.plfun import ClaspChoice
from bingshrink.strategies import Bing1952, SmallDisplacement


def write(tmp_path, text, name="a.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run_cli(tmp_path, text, command, *extra, out="out"):
    cfg = write(tmp_path, text)
    code = cli.main([command, "--config", cfg, "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_parse_defaults():
    rc = cli.parse_config("[run]\nstrategy = small_displacement\nmax_depth = 40\n")
    assert rc == ex.RunConfig(SmallDisplacement(), "extremal", 40)


def test_bad_value_names_field_and_line():
    text = "[run]\nstrategy = small_displacement\nmax_depth = 40\neps_L = -1\n"
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config(text)
    assert err.value.line == 4 and err.value.key == "eps_L"
    assert "line 4" in str(err.value) and "eps_L" in str(err.value)


@pytest.mark.parametrize("text,line,key", [
    ("[run]\nstrategy = bing1952\nfrobnicate = 3\n", 3, "frobnicate"),
    ("[run]\nstrategy = bing1952\nmax_depth = 3\nmax_depth = 4\n", 4, "max_depth"),
    ("[bogus]\n", 1, None),
    ("[run]\nstrategy = bing1952\nmax_depth = 3\neps_L = 0.1\nplane_count = 2\n", 5, "plane_count"),
    ("[run]\nstrategy = bing1952\nmax_depth = 3\ninitial_eps = 0.1\n", 4, "initial_eps"),
    ("[run]\nstrategy = small_displacement\nmax_depth = 3\nschedule = power K=0.1 p=1\n", 4, "schedule"),
    ("[run]\nnot a pair\n", 2, None),
])
def test_config_errors(text, line, key):
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config(text)
    assert err.value.line == line and err.value.key == key


def test_power_schedule_accepted():
    rc = cli.parse_config("[run]\nstrategy = small_displacement\nmax_depth = 5\nschedule = power K=0.1 p=0.5\n")
    assert rc.strategy.schedule == EpsSchedule.power(0.1, 0.5)


def test_common_keys_and_overrides():
    pc = cli.parse_config_text("workers = 2\nseed = 5\n[run]\nstrategy = bing1952\nmax_depth = 3\nseed = 6\n")
    cli.apply_overrides(pc, ["max_depth=4", "verify.strategy=random"], "run")
    rc = cli.run_config_from(pc.section("run"))
    assert (rc.workers, rc.seed, rc.max_depth) == (2, 6, 4)
    assert pc.section("verify").values["strategy"] == "random"
    with pytest.raises(cli.ConfigError):
        cli.apply_overrides(pc, ["nonsense"], "run")


def test_missing_required_key():
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config("[run]\nstrategy = bing1952\n")
    assert err.value.key == "max_depth"


def test_fmt():
    assert cli.fmt(F(1, 3)) == "1/3" and cli.fmt(F(1, 2), True) == "0.5"
    assert cli.fmt(None) == "" and cli.fmt(True) == "true" and cli.fmt(0.1) == "0.1"


def test_node_csv_examples(tmp_path):
    rep = ex.run_shrink(ex.RunConfig(max_depth=0))
    p = tmp_path / "root.csv"
    cli.emit_csv(rep, str(p))
    lines = p.read_text().splitlines()
    assert len(lines) == 2 and lines[0].split(",") == list(cli.CSV_COLUMNS)

    tree = BingTree()
    tree.expand("", ClaspChoice(F(1, 3), F(3, 4)))
    rows = {r[0]: dict(zip(cli.CSV_COLUMNS, r)) for r in cli.node_rows(tree)}
    assert rows["0"]["c"] == "-1/3" and rows["0"]["d"] == "3/4"
    assert rows[""]["a"] == "1/3" and rows[""]["disp_lo"] == "1/3"
    assert cli.node_rows(tree, decimal=True)[1][2] == repr(float(F(-1, 3)))


RUN_CFG = "[run]\nstrategy = bing1952\nmode = full\nmax_depth = 6\ntargets = 1/2, 1/5\n"


def test_run_outputs_byte_identical(tmp_path):
    code1, out1 = run_cli(tmp_path, RUN_CFG, "run", out="o1")
    code2, out2 = run_cli(tmp_path, RUN_CFG, "run", "--set", "workers=2", out="o2")
    assert code1 == code2 == 0
    for name in ("nodes.csv", "profile.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    code3, out3 = run_cli(tmp_path, RUN_CFG, "run", out="o3")
    assert (out1 / "report.json").read_bytes() == (out3 / "report.json").read_bytes()
    rep = json.loads((out1 / "report.json").read_text())
    assert rep["stages_to_target"] == {"1/2": 6, "1/5": "not reached"}
    with open(out1 / "nodes.csv") as fh:
        assert len(list(csv.reader(fh))) == 1 + 2**7 - 1


def test_svg_wellformed(tmp_path):
    code, out = run_cli(tmp_path, "[render]\nstrategy = small_displacement\nmax_depth = 0\n", "render")
    assert code == 0
    root = ET.parse(out / "functions.svg").getroot()
    (poly,) = root.iter("{http://www.w3.org/2000/svg}polyline")
    assert poly.get("points") == "0.0,0.0 1.0,1.0"
    code, out = run_cli(tmp_path, "[render]\nstrategy = small_displacement\nmax_depth = 30\nwhat = plane_tree\n",
                        "render", out="p")
    root = ET.parse(out / "plane_tree.svg").getroot()
    assert len(list(root.iter("{http://www.w3.org/2000/svg}line"))) > 30


def test_verify_exit_codes(tmp_path, capsys):
    ok = "[verify]\nstrategy = small_displacement\nmax_depth = 200\n"
    code, out = run_cli(tmp_path, ok, "verify")
    assert code == 0 and json.loads((out / "verify.json").read_text())["ok"]
    assert "PASS" in capsys.readouterr().out
    code, _ = run_cli(tmp_path, "[verify]\nstrategy = small_displacement\nmax_depth = x\n", "verify", out="bad")
    assert code == 2
    assert "max_depth" in capsys.readouterr().err


def test_verify_reports_first_offender(tmp_path, monkeypatch, capsys):
    real = ex.verify_tree

    def broken(report, aw_tol=F(0)):
        out = real(report, aw_tol)
        out[0].ok, out[0].first_offender, out[0].detail = False, "0110", "forced"
        return out

    monkeypatch.setattr(ex, "verify_tree", broken)
    code, _ = run_cli(tmp_path, "[verify]\nstrategy = bing1952\nmode = full\nmax_depth = 4\n", "verify")
    assert code == 1 and "'0110'" in capsys.readouterr().out


def test_montecarlo_and_compare(tmp_path):
    code, out = run_cli(tmp_path, "[montecarlo]\ntrials = 50\ndepth = 10\nseed = 3\n", "montecarlo")
    assert code == 0
    mc = json.loads((out / "montecarlo.json").read_text())
    assert len(mc["quantiles"]) == 11 and mc["monotone"]
    text = ("[compare]\ntargets = 1/5\n[compare.a]\nstrategy = bing1952\nmode = full\nmax_depth = 10\n"
            "[compare.b]\nstrategy = small_displacement\nmax_depth = 40\n")
    code, out = run_cli(tmp_path, text, "compare", out="cmp")
    assert code == 0
    rows = list(csv.reader(open(out / "compare.csv")))
    assert rows[0][:4] == ["name", "strategy", "interpretive", "stages<1/5"]
    assert rows[1][:4] == ["a", "bing1952", "false", "9"]
    assert rows[2][3] == "not reached"


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, RUN_CFG)
    res = subprocess.run([sys.executable, "-m", "bingshrink", "run", "--config", cfg, "--out", str(tmp_path / "m")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and (tmp_path / "m" / "report.json").exists()
