import json
import subprocess
import sys

import pytest

from netbell import cli
from netbell.bell import TSIRELSON, evaluate_S
from netbell.report import rounded, to_json
from netbell.scenario_io import parse_scenario
from netbell.verify import SuiteResult


def run(*args):
    return subprocess.run([sys.executable, "-m", "netbell", *map(str, args)], capture_output=True, text=True)


def test_analyze_chain5_matches_golden(scenarios_dir, golden_dir):
    out = run("analyze", scenarios_dir / "chain5_canonical.json")
    assert out.returncode == 0
    doc = json.loads(out.stdout)
    golden = json.loads((golden_dir / "chain5_analyze.json").read_text())
    assert {k: v for k, v in doc.items() if k not in ("version", "input_digest")} == golden
    assert doc["h_max"] == 3
    g2 = next(g for g in doc["independence"] if g["h"] == 2)
    assert g2["D"] == 6
    assert [s["indices"] for s in g2["sets"]] == [[1, 3], [1, 4], [1, 5], [2, 4], [2, 5], [3, 5]]


def test_analyze_byte_identical(scenarios_dir, capsys):
    outs = []
    for _ in range(2):
        assert cli.main(["analyze", str(scenarios_dir / "chain5_canonical.json")]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]


def test_eval_bilocal(scenarios_dir):
    out = run("eval", scenarios_dir / "bilocal_canonical.json")
    assert out.returncode == 0
    doc = json.loads(out.stdout)
    assert doc["S"] == pytest.approx(2.8284271, abs=1e-6)
    assert doc["tsirelson_satisfied"] and doc["violation"]
    assert doc["exact"]["S"] == pytest.approx(TSIRELSON, abs=1e-12)
    assert out.stderr == ""


def test_eval_correlations_and_set(scenarios_dir, capsys):
    code = cli.main(["eval", str(scenarios_dir / "chain5_canonical.json"), "--correlations", "--indep-set", "A1,A4"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["independent_set"]["names"] == ["A1", "A4"]
    assert len(doc["correlations"]) == 32
    assert sum(doc["correlations"][0]["p"].values()) == pytest.approx(1, abs=1e-8)


def test_verify_trig(capsys):
    code = cli.main(["verify", "--suite", "trig", "--trials", "10000", "--seed", "7"])
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    assert code == 0
    assert doc["passed"]
    (suite,) = doc["suites"]
    assert (suite["pass_count"], suite["trials"]) == (10000, 10000)
    assert "10000/10000" in captured.err


def test_verify_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_suite", lambda *a: [SuiteResult("trig", 3, 2, 0.1, 0.0)])
    assert cli.main(["verify", "--suite", "trig"]) == 1
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_input_errors_exit_2(tmp_path, scenarios_dir):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"parties": ["A"], "sources": []}))
    for args in (["eval", bad], ["eval", tmp_path / "missing.json"], ["analyze", bad],
                 ["eval", scenarios_dir / "bilocal_canonical.json", "--indep-set", "A1,A2"],
                 ["optimize", scenarios_dir / "bilocal_canonical.json", "--restarts", "0"],
                 ["verify", "--suite", "nope"]):
        out = run(*args)
        assert out.returncode == 2, args
        assert out.stdout == ""
        assert out.stderr


def test_parse_error_location(tmp_path):
    scenario = {
        "parties": ["A1", "A2", "A3"],
        "sources": [
            {"name": "S1", "parties": ["A1", "A2"], "state": {"kind": "singlet"}},
            {"name": "S2", "parties": ["A2", "A3"], "state": {"kind": "singlet"}},
        ],
        "observables": {
            "A1": [{"kind": "pauli", "label": "Z"}, {"kind": "pauli", "label": "X"}],
            "A2": [{"kind": "matrix", "matrix": [[1, 0], [0]]}, {"kind": "pauli", "label": "X", "tensor": 2}],
            "A3": [{"kind": "pauli", "label": "Z"}, {"kind": "pauli", "label": "X"}],
        },
    }
    f = tmp_path / "s.json"
    f.write_text(json.dumps(scenario))
    out = run("eval", f)
    assert out.returncode == 2
    assert "observables.A2[0].matrix" in out.stderr


def test_optimize_report_refeeds(scenarios_dir, tmp_path):
    out = run("optimize", scenarios_dir / "bilocal_canonical.json", "--restarts", "2", "--seed", "3")
    assert out.returncode == 0
    doc = json.loads(out.stdout)
    assert doc["config"]["seed"] == 3
    assert doc["S"] >= TSIRELSON - 1e-6
    f = tmp_path / "opt.json"
    f.write_text(json.dumps(doc["scenario"]))
    again = run("eval", f)
    assert json.loads(again.stdout)["exact"]["S"] == pytest.approx(doc["exact"]["S"], abs=1e-10)
    assert evaluate_S(parse_scenario(doc["scenario"])).S == pytest.approx(doc["exact"]["S"], abs=1e-10)


def test_optimize_abelian_flag(scenarios_dir, capsys):
    code = cli.main(["optimize", str(scenarios_dir / "bilocal_canonical.json"), "--restarts", "2",
                     "--constraint", "abelian_pairs"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["S"] == pytest.approx(2, abs=1e-4)


def test_certify_and_table(scenarios_dir):
    out = run("certify", scenarios_dir / "star3_canonical.json", "--format", "table")
    assert out.returncode == 0
    lines = dict(line.split(None, 1) for line in out.stdout.splitlines())
    assert lines["certificate.passed"].strip() == "true"
    assert lines["bell.S"].strip() == "2.82842712"


def test_report_rounding():
    doc = rounded({"S": 2.8284271247461903, "exact": {"S": 2.8284271247461903}, "n": 3, "ok": True})
    assert doc["S"] == 2.82842712
    assert doc["exact"]["S"] == 2.8284271247461903
    assert json.loads(to_json(doc)) == doc
