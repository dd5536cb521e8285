import json
import shutil
from pathlib import Path

import pytest

from idonly.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_run_valid_rb_scenario(tmp_path):
    out = tmp_path / "report.json"
    assert main(["run", str(SCENARIOS / "rb_correct_sender.json"), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["ok"] and report["seed"] == 1
    assert {o["acceptance_round"] for o in report["outputs"].values()} == {3}


def test_run_seed_override_is_recorded(tmp_path):
    out = tmp_path / "report.json"
    assert main(["run", str(SCENARIOS / "consensus_n7_equivocator.json"), "--seed", "99",
                 "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["seed"] == 99 and report["verdict"]["metrics"]["rounds"] > 0


def test_run_duplicate_ids_is_input_error(tmp_path):
    path = tmp_path / "dup.json"
    path.write_text(json.dumps({"protocol": "rb", "rounds": 5,
                                "nodes": [{"id": 1, "input": 3}, {"id": 1}]}))
    assert main(["run", str(path)]) == 2


def test_run_missing_and_malformed_files(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", str(bad)]) == 2


def test_run_property_failure_exits_one(tmp_path, capsys):
    obj = json.loads((SCENARIOS / "rb_n3_negative_control.json").read_text())
    del obj["expect_fail"]
    path = tmp_path / "control.json"
    path.write_text(json.dumps(obj))
    assert main(["run", str(path), "--out", str(tmp_path / "r.json")]) == 1
    assert "unforgeability failed" in capsys.readouterr().err


def test_run_writes_trace(tmp_path):
    trace = tmp_path / "trace.jsonl"
    assert main(["run", str(SCENARIOS / "rb_correct_sender.json"), "--out",
                 str(tmp_path / "r.json"), "--trace", str(trace)]) == 0
    first = json.loads(trace.read_text().splitlines()[0])
    assert list(first) == ["round", "sender", "recipient", "payload"]


def test_reports_are_stable(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        main(["run", str(SCENARIOS / "parallel_mixed.json"), "--out", str(p)])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_suite_with_expected_failures_passes(tmp_path, capsys):
    assert main(["suite", str(SCENARIOS), "--out-dir", str(tmp_path)]) == 0
    assert "scenarios passed" in capsys.readouterr().out
    assert len(list(tmp_path.glob("*.report.json"))) == len(list(SCENARIOS.glob("*.json")))


def test_suite_in_parallel(tmp_path):
    for name in ("rb_correct_sender.json", "approx_n7_random.json", "rb_n3_negative_control.json"):
        shutil.copy(SCENARIOS / name, tmp_path)
    assert main(["suite", str(tmp_path), "--jobs", "2"]) == 0


def test_suite_propagates_failures(tmp_path):
    shutil.copy(SCENARIOS / "rb_correct_sender.json", tmp_path)
    obj = json.loads((SCENARIOS / "rotor_reselect_counterexample.json").read_text())
    obj["expect_fail"] = False
    (tmp_path / "broken.json").write_text(json.dumps(obj))
    assert main(["suite", str(tmp_path)]) == 1
    (tmp_path / "invalid.json").write_text("[]")
    assert main(["suite", str(tmp_path)]) == 2


def test_suite_empty_directory(tmp_path):
    assert main(["suite", str(tmp_path)]) == 2


def test_explore_exit_codes(tmp_path):
    out = str(tmp_path / "x.json")
    assert main(["explore", "--n", "4", "--f", "1", "--horizon", "6", "--out", out]) == 0
    assert json.loads(Path(out).read_text())["violating_schedules"] == 0
    assert main(["explore", "--n", "3", "--f", "1", "--expect-fail", "--out", out]) == 0
    assert main(["explore", "--n", "3", "--f", "1", "--out", out]) == 0
    assert main(["explore", "--horizon", "20"]) == 3
    assert main(["explore", "--n", "4", "--f", "0", "--horizon", "4", "--expect-fail",
                 "--out", out]) == 1
    assert main(["explore", "--n", "2", "--f", "3"]) == 2


def test_demo_partition(tmp_path, capsys):
    out = tmp_path / "demo.json"
    assert main(["demo", "partition", "--block-size", "4", "--out", str(out)]) == 0
    assert "disagreement: block A -> 1, block B -> 0" in capsys.readouterr().err
    report = json.loads(out.read_text())
    assert report["verdict"]["metrics"]["block_outputs"] == {"A": [1], "B": [0]}
    assert main(["demo", "partition", "--cross-delay", "1", "--out", str(out)]) == 0
    assert "no disagreement" in capsys.readouterr().err
    assert main(["demo", "partition", "--block-size", "0"]) == 2


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["suite", ".", "--jobs", "0"]])
def test_usage_errors(argv):
    assert main(argv) == 2
