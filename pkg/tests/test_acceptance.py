"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run directly with ``python tests/test_acceptance.py`` or as part of pytest.
"""
import hashlib
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import pytest

from idonly.sim import generate as g
from idonly.sim import run_scenario
from idonly.sim.adversary import CATALOG
from idonly.sim.explore import explore_rb

ROOT = Path(__file__).resolve().parents[1]
EXTRA_PARAMS = {"fake_instance_injector": {"instance": 99, "phase": 1, "sub": 2, "value": 1},
                "churn_liar": {"round": 2}, "crash_at": {"round": 2}}


class Tally:
    """Counts runs, keeps the first few problems, and digests every report."""

    def __init__(self):
        self.runs = 0
        self.problems: list = []
        self.digest = hashlib.sha256()
        self.started = time.perf_counter()

    def run(self, sc):
        result = run_scenario(sc)
        self.runs += 1
        self.digest.update(result.report_json().encode())
        for check in result.verdict.failures():
            self.bad(f"{sc.protocol} seed {sc.seed}: {check.name}: {check.witness}")
        return result

    def bad(self, what: str):
        self.problems.append(what)

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.started


def _report(log, number, title, tally, budget, extra=""):
    ok = not tally.problems and tally.elapsed < budget
    status = "PASS" if ok else "FAIL"
    line = (f"[{status}] {number:>2}. {title}: {tally.runs} runs, {len(tally.problems)} problems, "
            f"{tally.elapsed:.1f}s (budget {budget:g}s){extra}")
    log.append(line)
    print(line)
    assert not tally.problems, tally.problems[:5]
    assert tally.elapsed < budget, f"took {tally.elapsed:.1f}s"


def rb_correct_sender_suite(tally, sizes=(4, 7, 10, 13)):
    for n in sizes:
        for k, name in enumerate(sorted(CATALOG)):
            sc = g.rb(n, 1000 * n + k, "silent")
            sc.adversary = name
            sc.adversary_params = dict(EXTRA_PARAMS.get(name, {}))
            g.validate(sc)
            result = tally.run(sc)
            rounds = {o["acceptance_round"] for o in result.outputs.values()}
            if rounds != {3}:
                tally.bad(f"n={n} {name}: acceptance rounds {rounds}")


def rb_byzantine_sender_suite(tally, runs=1000, sizes=(4, 7, 10)):
    for n in sizes:
        for seed in range(runs):
            tally.run(g.rb(n, seed, "random", byzantine_sender=True))


def rotor_suite(tally, runs=1000, sizes=(4, 7, 10, 13)):
    for seed in range(runs):
        n = sizes[seed % len(sizes)]
        result = tally.run(g.rotor(n, seed, g.STRATEGIES[seed % len(g.STRATEGIES)]))
        m = result.verdict.metrics
        if m["max_iterations"] is None or m["max_iterations"] > n + 1:
            tally.bad(f"rotor n={n} seed {seed}: {m['max_iterations']} iterations")
        if m["good_round"] is None:
            tally.bad(f"rotor n={n} seed {seed}: no good round")


def consensus_suite(tally, runs=1000, sizes=(4, 7, 10, 13)):
    worst = {}
    for n in sizes:
        f = g.max_faulty(n)
        for k, name in enumerate(g.STRATEGIES):
            for value in (0, 1):
                result = tally.run(g.consensus(n, 10 * k + value, name, unanimous=value))
                outs = {o["output"] for o in result.outputs.values()}
                phases = {o["phase"] for o in result.outputs.values()}
                if outs != {value} or phases != {1}:
                    tally.bad(f"unanimous {value} n={n} {name}: outputs {outs} phases {phases}")
        bound = 2 + 5 * (2 * f + 3)
        for seed in range(runs):
            result = tally.run(g.consensus(n, seed, g.STRATEGIES[seed % len(g.STRATEGIES)]))
            last = result.verdict.metrics["rounds_to_decide"]
            worst[n] = max(worst.get(n, 0), last or 0)
            if last is None or last > bound:
                tally.bad(f"consensus n={n} seed {seed}: decided at {last}, bound {bound}")
    return worst


def approx_suite(tally, runs=1000, sizes=(4, 7, 10)):
    for n in sizes:
        for seed in range(runs):
            tally.run(g.approx(n, seed, g.STRATEGIES[seed % len(g.STRATEGIES)]))


def parallel_suite(tally, runs=1000, sizes=(4, 7, 10, 13)):
    for seed in range(runs):
        n = sizes[(seed // len(g.PC_CASES)) % len(sizes)]
        tally.run(g.parallel(n, seed, g.PC_CASES[seed % len(g.PC_CASES)]))


def dynamic_suite(tally, runs=200):
    for seed in range(runs):
        tally.run(g.dynamic(seed))


def partition_suite(tally):
    result = tally.run(g.partition(4))
    outputs = result.verdict.metrics["block_outputs"]
    if outputs != {"A": [1], "B": [0]}:
        tally.bad(f"block outputs {outputs}")


def test_01_rb_correct_sender_round(acceptance_log):
    tally = Tally()
    rb_correct_sender_suite(tally)
    _report(acceptance_log, 1, "RB correct sender accepts at exactly round 3", tally, 5)


def test_02_rb_byzantine_sender_safety(acceptance_log):
    tally = Tally()
    rb_byzantine_sender_suite(tally)
    _report(acceptance_log, 2, "RB Byzantine sender: unforgeability and relay", tally, 60)


def test_03_rb_exhaustive(acceptance_log):
    tally = Tally()
    detail = []
    for byz in (False, True):
        result = explore_rb(4, 1, 8, byzantine_sender=byz)
        tally.runs += 1
        who = "Byzantine" if byz else "correct"
        detail.append(f"{who} sender {result.schedules:.3g} schedules")
        if not result.verdict.passed:
            tally.bad(f"n=4 byzantine_sender={byz}: {result.violating_schedules} violating schedules")
    control = explore_rb(3, 1, 8)
    tally.runs += 1
    if control.verdict.passed:
        tally.bad("n=3 f=1 negative control found no violation")
    _report(acceptance_log, 3, "RB exhaustive exploration n=4 f=1 horizon 8", tally, 300,
            f"; {', '.join(detail)}; control violations {control.violating_schedules:.3g}")


def test_04_rotor(acceptance_log):
    tally = Tally()
    rotor_suite(tally)
    _report(acceptance_log, 4, "Rotor: termination within n+1 iterations and a good round", tally, 60)


def test_05_consensus(acceptance_log):
    tally = Tally()
    worst = consensus_suite(tally)
    _report(acceptance_log, 5, "Consensus: unanimity, agreement, validity, quorums, round bound",
            tally, 120, f"; latest decision per n {worst}")


def test_06_approx(acceptance_log):
    tally = Tally()
    approx_suite(tally)
    _report(acceptance_log, 6, "Approximate agreement: containment, median, halving", tally, 30)


def test_07_parallel(acceptance_log):
    tally = Tally()
    parallel_suite(tally)
    _report(acceptance_log, 7, "Parallel consensus: validity, agreement, no phantom output", tally, 120)


def test_08_dynamic(acceptance_log):
    tally = Tally()
    dynamic_suite(tally)
    _report(acceptance_log, 8, "Dynamic total order: prefix, growth, finality", tally, 300)


def test_09_partition(acceptance_log):
    tally = Tally()
    partition_suite(tally)
    _report(acceptance_log, 9, "Partition demo: block A outputs 1, block B outputs 0", tally, 5)


def _digests(runs: int) -> list:
    suites = [rb_correct_sender_suite, lambda t: rb_byzantine_sender_suite(t, runs),
              lambda t: rotor_suite(t, runs), lambda t: consensus_suite(t, runs),
              lambda t: approx_suite(t, runs), lambda t: parallel_suite(t, runs),
              lambda t: dynamic_suite(t, max(1, runs // 10)), partition_suite]
    out = []
    for suite in suites:
        tally = Tally()
        suite(tally)
        out.append(tally.digest.hexdigest())
    out.append(hashlib.sha256(repr(explore_rb(4, 1, 6, byzantine_sender=True).to_obj())
                              .encode()).hexdigest())
    return out


def _suite_reports(hash_seed: str) -> dict:
    with tempfile.TemporaryDirectory() as tmp:
        env = dict(os.environ, PYTHONHASHSEED=hash_seed)
        subprocess.run([sys.executable, "-m", "idonly.cli", "suite", str(ROOT / "scenarios"),
                        "--out-dir", tmp], env=env, capture_output=True, check=False)
        return {p.name: p.read_bytes() for p in sorted(Path(tmp).iterdir())}


def test_10_determinism(acceptance_log):
    tally = Tally()
    first, second = _digests(30), _digests(30)
    tally.runs += 2 * len(first)
    for k, (a, b) in enumerate(zip(first, second)):
        if a != b:
            tally.bad(f"suite {k} report digests differ")
    # a fresh interpreter with a different hash seed must produce the same bytes
    one, two = _suite_reports("1"), _suite_reports("2")
    tally.runs += 2
    if not one or one != two:
        tally.bad(f"scenario suite reports differ across processes: "
                  f"{sorted(k for k in one if one.get(k) != two.get(k))}")
    _report(acceptance_log, 10, "Determinism: identical seeds give byte-identical reports", tally,
            600, f"; {len(one)} scenario reports compared across processes")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
