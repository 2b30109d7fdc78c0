import csv
import io
import json
import math
import subprocess
import sys

import pytest

from pmodulus import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def checks_of(text):
    return [c for r in json.loads(text)["reports"] for c in r["checks"]]


def test_scenario_list(capsys):
    code, out, _ = run(capsys, "scenario", "list")
    assert code == 0
    for name in ("rectangle", "heisenberg-ring", "log-spiral", "ring-bounds"):
        assert name in out


def test_rectangle_all_levels(capsys):
    code, out, _ = run(capsys, "scenario", "run", "rectangle", "--a", "1", "--b", "2",
                       "--p", "2", "--level", "all")
    assert code == 0
    payload = json.loads(out)
    assert payload["passed"]
    checks = checks_of(out)
    assert {c["name"] for c in checks} >= {"module by grid oracle", "module closed form"}
    assert all(c["expected"] == 0.5 for c in checks if c["name"].startswith("module"))
    assert all(c["provenance"] in cli.PROVENANCE for c in checks)


def test_heisenberg_ring_fourth_module(capsys):
    code, out, _ = run(capsys, "scenario", "run", "heisenberg-ring", "--p", "4", "--b",
                       "2.718281828", "--level", "quadrature")
    assert code == 0
    ring = [c for c in checks_of(out) if c["name"] == "ring module"][0]
    assert ring["computed"] == pytest.approx(math.pi ** 2, rel=1e-6)


def test_log_spiral_radial_case(capsys):
    code, out, _ = run(capsys, "scenario", "run", "log-spiral", "--beta", "0", "--b", "2")
    assert code == 0
    for c in checks_of(out):
        assert c["computed"] == pytest.approx(2 * math.pi / math.log(2), rel=1e-9)


def test_equals_syntax_and_csv(capsys):
    code, out, _ = run(capsys, "scenario", "run", "annulus", "--b=3", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows and all(r["passed"] == "True" for r in rows)
    assert set(rows[0]) >= {"expected", "computed", "tolerance", "provenance", "source"}


def test_environment_tolerance(capsys, monkeypatch):
    monkeypatch.setenv(cli.TOL_ENV, "1e-30")
    code, out, _ = run(capsys, "scenario", "run", "spherical-ring", "--n", "3", "--p", "2.5")
    assert code == 1
    assert not json.loads(out)["passed"]
    monkeypatch.setenv(cli.TOL_ENV, "1e-6")
    code, out, _ = run(capsys, "scenario", "run", "spherical-ring", "--n", "3", "--p", "2.5")
    assert code == 0
    assert all(c["tolerance"] == 1e-6 for c in checks_of(out) if c["name"].startswith("fibre"))
    monkeypatch.setenv(cli.TOL_ENV, "tight")
    code, _, err = run(capsys, "scenario", "run", "cylinder")
    assert code == 2 and cli.TOL_ENV in err


def test_tol_flag_beats_environment(capsys, monkeypatch):
    monkeypatch.setenv(cli.TOL_ENV, "1e-30")
    code, _, _ = run(capsys, "scenario", "run", "cylinder", "--tol", "1e-8")
    assert code == 0


@pytest.mark.parametrize("argv", [("scenario", "run", "nope"),
                                  ("scenario", "run", "rectangle", "--a", "wide"),
                                  ("scenario", "run", "rectangle", "--a"),
                                  ("scenario", "run", "rectangle", "stray"),
                                  ("scenario", "run", "carnot-ring", "--group", "engel"),
                                  ("oracle", "solve", "hexagon:n=3")])
def test_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("error:")


def test_config_file_and_output(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"a": 2.0, "b": 4.0, "p": 3.0}))
    dest = tmp_path / "report.json"
    code, out, _ = run(capsys, "scenario", "run", "rectangle", "--config", str(cfg),
                       "--p", "2", "--output", str(dest))
    assert code == 0 and out == ""
    rep = json.loads(dest.read_text())["reports"][0]
    assert rep["params"]["a"] == 2.0 and rep["params"]["p"] == 2.0
    assert rep["checks"][0]["expected"] == pytest.approx(0.5)


def test_oracle_solve(capsys):
    code, out, _ = run(capsys, "oracle", "solve", "rectangle:a=1,b=2,n=40", "--expected", "0.5")
    assert code == 0
    notes = json.loads(out)["reports"][0]["notes"]
    assert notes["value"] == pytest.approx(0.5, rel=0.02)
    code, _, _ = run(capsys, "oracle", "solve", "rectangle:a=1,b=2,n=40", "--expected", "0.7")
    assert code == 1


def test_oracle_solve_separating(capsys):
    code, out, _ = run(capsys, "oracle", "solve", "rectangle:a=1,b=2,n=30", "--separating",
                       "--expected", "2.0", "--format", "csv")
    assert code == 0
    assert "oracle value" in out


def test_sweep_columns(capsys):
    code, out, _ = run(capsys, "sweep", "ring-bounds", "--param", "k", "--start", "1",
                       "--stop", "3", "--steps", "3")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["parameter", "value", "lower_bound", "upper_bound"]
    assert len(rows) == 4
    lo, hi = float(rows[1][2]), float(rows[1][3])
    assert lo == pytest.approx(hi) == pytest.approx(math.log(2) / (2 * math.pi))


@pytest.mark.parametrize("suite", ["duality", "carnot", "extremality"])
def test_suites_pass(capsys, suite):
    code, out, _ = run(capsys, "suite", suite)
    assert code == 0
    assert json.loads(out)["passed"]


def test_reports_are_deterministic():
    a = [r.to_dict()["checks"] for r in cli.run_suite("duality")]
    b = [r.to_dict()["checks"] for r in cli.run_suite("duality")]
    assert a == b


def test_check_modes():
    assert cli.Check("x", 1.0, 1.0 + 1e-9, 1e-8, "rel", "trivial", "").passed
    assert not cli.Check("x", 1.0, 1.1, 1e-8, "abs", "trivial", "").passed
    assert cli.Check("x", 1.0, 0.5, 0.0, "le", "trivial", "").passed
    assert not cli.Check("x", 1.0, 0.5, 0.0, "ge", "trivial", "").passed
    assert cli.Check("x", [1.0, 2.0], 2.01, 0.01, "within", "trivial", "").passed
    assert not cli.Check("x", 1.0, float("nan"), 1.0, "abs", "trivial", "").passed
    with pytest.raises(ValueError):
        cli.Check("x", 1.0, 1.0, 0.0, "rel", "folklore", "")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pmodulus", "scenario", "run", "cylinder",
                           "--n", "3", "--p", "2.5"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["passed"]
