import csv
import json
import math
import subprocess
import sys

import pytest

from ergolab import cli
from ergolab.reports import dumps, fmt_float, normalize

from conftest import fixture_path


def run(args, capsys=None):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr() if capsys is not None else None
    return code, out


def test_fmt_float_and_normalize():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert fmt_float(math.inf) == "inf" and fmt_float(-math.inf) == "-inf" and fmt_float(math.nan) == "nan"
    assert normalize({"a": (1, 2.5, math.inf)}) == {"a": [1, 2.5, "inf"]}
    text = dumps({"x": 1 / 3, "y": [True, None]})
    assert json.loads(text) == {"x": 1 / 3, "y": [True, None]}


def test_check_three_cycle(tmp_path):
    rep = tmp_path / "r.json"
    code, _ = run(["check", "--system", fixture_path("three_cycle.json"), "--process",
                   fixture_path("three_cycle.proc.json"), "--nmax", 300, "--report", rep])
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["hypotheses"]["condition_a"]["holds"] and doc["hypotheses"]["condition_b"]["holds"]
    assert abs(doc["theorem_a"]["L"] - 1 / 3) < 1e-15
    assert "TheoremA" in doc["tags"] and "CorollaryB" in doc["tags"]
    with open(rep.with_suffix(".csv")) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "R_n", "L", "gap"] and len(rows) == 301
    assert abs(float(rows[-1][1]) - 1 / 3) < 1e-12


def test_check_report_round_trip(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["check", "--system", fixture_path("cocycles/alternating.json"), "--process",
                fixture_path("cocycles/alternating.proc.json"), "--nmax", 128, "--norm", "frobenius",
                "--report", a])[0] == 0
    assert run(["check", "--config", a, "--report", b])[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_counterexample_exits_zero_with_fails(tmp_path):
    rep = tmp_path / "r.json"
    code, _ = run(["check", "--system", fixture_path("counterexamples/collapse.json"), "--nmax", 64, "--report", rep])
    assert code == 0
    assert json.loads(rep.read_text())["theorem_a"]["verdict"] == "fails"


@pytest.mark.parametrize("args", [
    ["check", "--system", "/nonexistent.json"],
    ["check"],
    ["check", "--system", fixture_path("three_cycle.json"), "--kmax", 0],
    ["flow", "--observable", ""],
    ["bowen", "--observable", ""],
    ["bowen", "--x0", "0,2"],
    ["fekete", "--gen", ""],
    ["fekete", "--gen", "n*n"],
])
def test_validation_errors_exit_2(args, capsys):
    code, out = run(args, capsys)
    assert code == 2
    assert "invalid input" in out.err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["check", "--norm", "max"])
    assert exc.value.code == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "fekete", "parameters": {"bogus": 1}}))
    assert run(["fekete", "--config", cfg])[0] == 2


def test_integration_failure_exit_3(tmp_path):
    fld = tmp_path / "blowup.json"
    fld.write_text(json.dumps({"variables": ["x"], "rhs": ["x**2"]}))
    rep, tr = tmp_path / "r.json", tmp_path / "t.csv"
    code, _ = run(["flow", "--field", fld, "--x0", "1", "--T", 5, "--observable", "x", "--criteria", "false",
                   "--report", rep, "--trace", tr])
    assert code == 3
    doc = json.loads(rep.read_text())
    assert doc["status"] == "integration_failure" and "config" in doc
    assert tr.exists()


def test_fekete_example(capsys):
    code, out = run(["fekete", "--gen", "n+log(n+1)", "--horizon", 1000], capsys)
    assert code == 0
    doc = json.loads(out.out)
    assert abs(doc["estimate"] - 1) < 1e-2
    assert doc["config"]["parameters"]["gen"] == "n+log(n+1)"


def test_fekete_derriennic(capsys):
    code, out = run(["fekete", "--gen", "2*n + 3*sin(n)", "--c-gen", "9 + 0*n", "--horizon", 4000], capsys)
    assert code == 0
    doc = json.loads(out.out)
    assert "Derriennic" in doc["tags"] and abs(doc["estimate"] - 2) < 1e-2


def test_kingman_full(tmp_path):
    rep = tmp_path / "k.json"
    code, _ = run(["kingman", "--system", fixture_path("tails.json"), "--nmax", 128, "--search", 40,
                   "--report", rep])
    assert code == 0
    doc = json.loads(rep.read_text())
    for tag in ("TheoremA", "CorollaryB", "LemmaAssumpa", "Lema1a", "Gooda_i", "Gooda_iv"):
        assert tag in doc["tags"]
    assert doc["subadditivity_audit"]["holds"]
    assert doc["lemma1"]["holds"]
    assert len(doc["per_state"]) == 8
    assert "counterexample_search" in doc


def test_kingman_seed_is_deterministic(tmp_path):
    outs = []
    for i in range(2):
        rep = tmp_path / f"k{i}.json"
        assert run(["kingman", "--system", fixture_path("cocycles/singular4.json"), "--process",
                    fixture_path("cocycles/singular4.proc.json"), "--nmax", 64, "--seed", 7, "--report", rep])[0] == 0
        outs.append(rep.read_bytes())
    assert outs[0] == outs[1]


def test_flow_sink(tmp_path):
    rep, tr = tmp_path / "f.json", tmp_path / "f.csv"
    code, _ = run(["flow", "--field", "sink", "--x0", "0.5,0.5", "--T", 1000, "--observable", "x**2",
                   "--report", rep, "--trace", tr])
    assert code == 0
    doc = json.loads(rep.read_text())
    assert abs(doc["trace"]["final_average"]) < 1e-3
    assert doc["theorem_c"]["verdict"] == "holds"
    assert "LemmaFixedPoint" in doc["tags"] and "Gooda11" in doc["tags"]
    with open(tr) as fh:
        assert next(csv.reader(fh)) == ["T", "running_average", "liminf_est", "limsup_est"]


def test_flow_coefficient_file(tmp_path):
    rep = tmp_path / "f.json"
    code, _ = run(["flow", "--field", fixture_path("fields/rotation_coeffs.json"), "--x0", "1,0", "--T", 100,
                   "--observable", "x", "--criteria", "no", "--report", rep])
    assert code == 0
    assert abs(json.loads(rep.read_text())["trace"]["final_average"]) < 1e-2


def test_bowen_hybrid_cli(tmp_path):
    rep, tr = tmp_path / "h.json", tmp_path / "h.csv"
    code, _ = run(["bowen-hybrid", "--alpha-minus", 4, "--alpha-plus", 2, "--beta-minus", 2, "--beta-plus", 2,
                   "--a", 0, "--b", 1, "--epochs", 1000, "--out", rep, "--trace", tr])
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["oracle"]["max_abs_error"] <= 1e-9
    assert abs(doc["limsup_est"] - doc["zero_transit_limits"]["limsup"]) <= 1e-9
    assert doc["tags"] == ["CorBowen"]


def test_bowen_cli_file_observable(tmp_path):
    rep = tmp_path / "b.json"
    code, _ = run(["bowen", "--observable", fixture_path("observables/x_minus_y.expr"), "--x0", "0,0.5",
                   "--tmax", 5000, "--out", rep])
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["observable"] == "x_minus_y" and doc["prediction"] == "OSCILLATING"


def test_threads_env_validation(monkeypatch):
    monkeypatch.setenv("ERGOLAB_THREADS", "zero")
    assert cli.main(["fekete"]) == 2


def test_help_mentions_tags():
    out = subprocess.run([sys.executable, "-m", "ergolab.cli", "check", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "[TheoremA]" in out.stdout
    out = subprocess.run([sys.executable, "-m", "ergolab.cli", "bowen", "--help"], capture_output=True, text=True)
    assert "[CorBowen" in out.stdout
