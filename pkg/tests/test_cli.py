import csv
import json
from fractions import Fraction
from pathlib import Path

import pytest

from routershare.cli import decimal_text, main

SCENARIO_W = {
    "n": 3,
    "k_max": 2,
    "epsilon": "1",
    "seed": 7,
    "costs": ["4", "6"],
    "users": [
        {"pb": ["5", "4"], "jb": ["12", "9"]},
        {"pb": ["4", "3"], "jb": ["11", "8"]},
        {"pb": ["3", "2"], "jb": ["10", "8"]},
    ],
}


@pytest.fixture
def w_file(tmp_path):
    path = tmp_path / "w.json"
    path.write_text(json.dumps(SCENARIO_W), encoding="utf-8")
    return path


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_run_equilibrium_csv(w_file, tmp_path, capsys):
    out = tmp_path / "w.csv"
    assert main(["run", str(w_file), "--strategies", "equilibrium", "--csv", str(out)]) == 0
    rows = _read_csv(out)
    assert [r["net"] for r in rows[:3]] == ["13/3", "10/3", "7/3"]
    assert [r["net_decimal"] for r in rows[:3]] == ["4.333333", "3.333333", "2.333333"]
    total = rows[3]
    assert (total["user"], total["net"], total["residual"]) == ("total", "10", "0")
    assert "residual: 0" in capsys.readouterr().out


def test_run_terminated(tmp_path, capsys):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"costs": ["5"], "users": [{"pb": ["3"]}, {"pb": ["1"]}]}))
    out = tmp_path / "t.csv"
    assert main(["run", str(path), "--csv", str(out)]) == 0
    assert "terminated" in capsys.readouterr().out
    rows = _read_csv(out)
    assert [r["user"] for r in rows] == ["total"]


def test_run_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"costs": ["1"],\n "users": [,]}')
    assert main(["run", str(path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_run_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_run_validation_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"costs": ["1", "2"], "users": [{"pb": ["2", "5"]}, {"pb": ["1"]}]}))
    assert main(["run", str(path)]) == 2
    assert "NonMonotoneSchedule" in capsys.readouterr().err


def test_verify_worked_scenario(w_file, capsys):
    assert main(["verify", str(w_file), "--samples", "10"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]
    assert report["audit"]["budget_residual"] == "0"


def test_verify_budget_exceeded(w_file, capsys):
    assert main(["verify", str(w_file), "--cap", "100000", "--eps", "1/100"]) == 2
    assert "budget" in capsys.readouterr().err


def test_verify_random_small(capsys):
    assert main(["verify", "--random", "3", "2", "5", "3", "--samples", "5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["runs"]) == 3
    assert all(r["audit"]["budget_residual"] == "0" for r in report["runs"])


def test_sweep_cost_scale(w_file, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", str(w_file), "--param", "cost_scale", "--from", "0.5", "--to", "2.0",
                 "--step", "0.5", "--csv", str(out)]) == 0
    totals = [r for r in _read_csv(out) if r["user"] == "total"]
    assert [r["value"] for r in totals] == ["1/2", "1", "3/2", "2"]
    counts = [len(r["manufactured"].split()) for r in totals]
    assert counts == sorted(counts, reverse=True)
    assert all(r["residual"] == "0" for r in totals)


def test_sweep_empty_range(w_file, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", str(w_file), "--param", "cost_scale", "--from", "2", "--to", "1",
                 "--step", "1", "--csv", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1


def test_sweep_symmetric_n(w_file, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", str(w_file), "--param", "n", "--from", "2", "--to", "4", "--step", "1",
                 "--csv", str(out)]) == 0
    totals = [r for r in _read_csv(out) if r["user"] == "total"]
    assert len(totals) == 3
    assert all(r["residual"] == "0" for r in totals)


def test_csv_is_deterministic_and_lossless(w_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", str(w_file), "--param", "value_scale", "--from", "1/3", "--to", "1", "--step", "1/3"]
    assert main(args + ["--csv", str(a)]) == 0
    assert main(args + ["--csv", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    for row in _read_csv(a):
        for key in ("net", "utility"):
            if row[key]:
                assert str(Fraction(row[key])) == row[key]


def test_decimal_text():
    assert decimal_text(Fraction(13, 3)) == "4.333333"
    assert decimal_text(Fraction(-5, 2)) == "-2.500000"


def test_shipped_scenario_files():
    root = Path(__file__).resolve().parents[1] / "scenarios"
    assert main(["run", str(root / "worked.json")]) == 0
    assert main(["run", str(root / "terminates.json")]) == 0
