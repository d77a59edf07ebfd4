import json
import os
import subprocess
import sys

import pytest

from evacshare.cli import EXIT_INVALID, EXIT_OK, EXIT_USAGE, main
from evacshare.instance import serialize_instance
from evacshare.plan import Plan
from helpers import T1_DOC


@pytest.fixture
def t1_file(tmp_path):
    p = tmp_path / "t1.json"
    p.write_text(json.dumps(T1_DOC()))
    return str(p)


@pytest.fixture
def broken_file(tmp_path):
    doc = T1_DOC()
    doc["locations"][0]["capacity"] = 2
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(doc))
    return str(p)


def _run(*argv):
    return subprocess.run([sys.executable, "-m", "evacshare.cli", *argv], capture_output=True, text=True)


@pytest.mark.parametrize("method", ["brute", "exact", "greedy", "local-search", "heuristic"])
def test_solve_t1(t1_file, method, capsys):
    assert main(["solve", "--instance", t1_file, "--method", method]) == EXIT_OK
    out, err = capsys.readouterr()
    plan = Plan.from_json(out)
    assert plan.evacuated_total == 6
    status = json.loads(err.strip().splitlines()[-1])
    assert status["objective"] == 6


def test_exact_status_record(t1_file, capsys):
    main(["solve", "--instance", t1_file])
    status = json.loads(capsys.readouterr().err)
    assert status["status"] == "optimal" and status["best_bound"] == 6


def test_validate(t1_file, broken_file, capsys):
    assert main(["validate", "--instance", t1_file]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert main(["validate", "--instance", broken_file]) == EXIT_INVALID
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 and "CapacityBelowDemand" in lines[0]


def test_validate_plan(t1_file, tmp_path, capsys):
    main(["solve", "--instance", t1_file, "--out", str(tmp_path / "p.json")])
    capsys.readouterr()
    assert main(["validate", "--instance", t1_file, "--plan", str(tmp_path / "p.json")]) == EXIT_OK
    plan = json.loads((tmp_path / "p.json").read_text())
    plan["evacuated_total"] = 5
    (tmp_path / "p.json").write_text(json.dumps(plan))
    assert main(["validate", "--instance", t1_file, "--plan", str(tmp_path / "p.json")]) == EXIT_INVALID
    assert "EvacuatedTotalMismatch" in capsys.readouterr().out


def test_metrics(t1_file, tmp_path, capsys):
    plan_path = str(tmp_path / "p.json")
    main(["solve", "--instance", t1_file, "--out", plan_path])
    capsys.readouterr()
    assert main(["metrics", "--instance", t1_file, "--plan", plan_path]) == EXIT_OK
    # speed 0.5: (2 + 2) minutes -> 2.0 miles
    assert json.loads(capsys.readouterr().out) == {"EP": 1.0, "ATD": 2.0}


def test_usage_errors(t1_file, tmp_path, capsys):
    assert main(["solve", "--instance", t1_file, "--method", "teleport"]) == EXIT_USAGE
    assert main(["solve", "--instance", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert main(["gen", "--ratio", "1.5"]) == EXIT_USAGE
    assert main(["sweep", "--methods", "nope"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    capsys.readouterr()


def test_invalid_instance_exit_code(broken_file, capsys):
    assert main(["solve", "--instance", broken_file]) == EXIT_INVALID
    assert "invalid" in capsys.readouterr().err


def test_no_partial_file_on_usage_error(tmp_path, capsys):
    out = tmp_path / "inst.json"
    assert main(["gen", "--ratio", "0", "--out", str(out)]) == EXIT_USAGE
    assert not out.exists()
    assert os.listdir(tmp_path) == []


def test_out_replaces_atomically(tmp_path, capsys):
    out = tmp_path / "inst.json"
    out.write_text("old")
    assert main(["gen", "--seed", "2", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["name"].endswith("s2")
    assert sorted(os.listdir(tmp_path)) == ["inst.json"]


def test_gen_matches_library(capsys):
    from evacshare.experiment import GenConfig, generate_instance

    main(["gen", "--seed", "5", "--ratio", "0.3", "--t-max", "9"])
    expected = serialize_instance(generate_instance(GenConfig(seed=5, r_ratio=0.3, t_max=9)), indent=2) + "\n"
    assert capsys.readouterr().out == expected


def test_export_mip(t1_file, capsys):
    assert main(["export-mip", "--instance", t1_file]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("Maximize") and "c13_deadline_h1_s1_r1" in text


def test_sweep_writes_csv_and_svg(tmp_path, capsys):
    csv_path, svg_path = tmp_path / "r.csv", tmp_path / "r.svg"
    argv = ["sweep", "--ratios", "0.3,0.5", "--tmaxes", "5,9", "--methods", "greedy", "--out", str(csv_path), "--svg", str(svg_path)]
    assert main(argv) == EXIT_OK
    assert len(csv_path.read_text().splitlines()) == 5
    assert svg_path.read_text().count("<polyline") == 4
    assert json.loads(capsys.readouterr().err) == {"cells": 4, "errors": 0}


def test_entry_point_is_byte_identical(t1_file):
    a = _run("solve", "--instance", t1_file, "--method", "heuristic")
    b = _run("solve", "--instance", t1_file, "--method", "heuristic")
    assert a.returncode == b.returncode == 0
    assert a.stdout == b.stdout and a.stdout
    g1 = _run("gen", "--seed", "9")
    g2 = _run("gen", "--seed", "9")
    assert g1.stdout == g2.stdout


def test_entry_point_exit_codes(t1_file, broken_file):
    assert _run("validate", "--instance", broken_file).returncode == EXIT_INVALID
    assert _run("solve", "--instance", t1_file, "--bogus").returncode == EXIT_USAGE


def test_stdin_instance(t1_file):
    with open(t1_file) as fh:
        res = subprocess.run(
            [sys.executable, "-m", "evacshare.cli", "solve", "--instance", "-", "--method", "greedy"],
            stdin=fh,
            capture_output=True,
            text=True,
        )
    assert res.returncode == 0 and Plan.from_json(res.stdout).evacuated_total == 6
