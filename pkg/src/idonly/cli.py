"""Command-line front end: run scenarios and suites, explore, and demo.

Exit codes: 0 pass, 1 property failure, 2 input error, 3 resource cap.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from .core import ProtocolError
from .sim.engine import ModelViolation
from .sim.explore import DEFAULT_CAP, ExplorationTooLarge, explore_rb
from .sim.partition import partition_summary, run_partition_demo
from .sim.runner import run_scenario
from .sim.scenario import ScenarioError, load

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _describe_failures(result) -> str:
    lines = []
    for check in result.verdict.failures():
        lines.append(f"  {check.name} failed at round {check.first_round}: {check.witness}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    try:
        scenario = load(args.file)
    except FileNotFoundError:
        _err(f"error: no such file {args.file}")
        return EXIT_INPUT
    except ScenarioError as exc:
        _err(f"error: {args.file}: {exc}")
        return EXIT_INPUT
    try:
        result = run_scenario(scenario, seed=args.seed, record=bool(args.trace))
    except (ModelViolation, ProtocolError) as exc:
        _err(f"run aborted: {type(exc).__name__}: {exc}")
        return EXIT_FAIL
    _write(result.report_json(wall_time=args.wall_time), args.out or scenario.output)
    if args.trace:
        with open(args.trace, "w") as fh:
            result.truth.dump(fh)
    status = "PASS" if result.ok else "FAIL"
    if scenario.expect_fail:
        status += " (expected failure)" if result.ok else " (expected a failure, none found)"
    _err(f"{status}: {args.file} [{scenario.protocol}, seed {scenario.seed}, "
         f"{result.verdict.metrics['rounds']} rounds]")
    if not result.verdict.passed and not scenario.expect_fail:
        _err(_describe_failures(result))
    return EXIT_PASS if result.ok else EXIT_FAIL


def _suite_one(path: str) -> tuple:
    """Run one suite member; returns (path, exit code, protocol, detail, report)."""
    try:
        scenario = load(path)
    except ScenarioError as exc:
        return path, EXIT_INPUT, "-", str(exc), None
    try:
        result = run_scenario(scenario)
    except (ModelViolation, ProtocolError) as exc:
        return path, EXIT_FAIL, scenario.protocol, f"aborted: {exc}", None
    failed = ", ".join(c.name for c in result.verdict.failures())
    if result.ok:
        detail = "expected failure seen" if scenario.expect_fail else ""
    else:
        detail = "expected a failure, none found" if scenario.expect_fail else failed
    return (path, EXIT_PASS if result.ok else EXIT_FAIL, scenario.protocol, detail,
            result.report_json())


def cmd_suite(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        _err(f"error: {root} is not a directory")
        return EXIT_INPUT
    files = sorted(str(p) for p in root.glob("*.json"))
    if not files:
        _err(f"error: no scenario files in {root}")
        return EXIT_INPUT
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_suite_one, files))
    else:
        results = [_suite_one(p) for p in files]
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    width = max(len(Path(p).name) for p in files)
    code = EXIT_PASS
    label = {EXIT_PASS: "PASS", EXIT_FAIL: "FAIL", EXIT_INPUT: "ERROR"}
    for path, rc, protocol, detail, report in results:
        print(f"{Path(path).name:<{width}}  {protocol:<14}  {label[rc]:<5}  {detail}".rstrip())
        if report is not None and args.out_dir:
            (Path(args.out_dir) / (Path(path).stem + ".report.json")).write_text(report)
        code = max(code, rc)
    passed = sum(1 for r in results if r[1] == EXIT_PASS)
    print(f"{passed}/{len(results)} scenarios passed")
    return code


def cmd_explore(args) -> int:
    try:
        result = explore_rb(args.n, args.f, args.horizon, byzantine_sender=args.byzantine_sender,
                            cap=args.cap)
    except ExplorationTooLarge as exc:
        _err(f"refused: {exc}")
        return EXIT_CAP
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    _write(json.dumps(result.to_obj(), indent=2) + "\n", args.out)
    violations = not result.verdict.passed
    control = args.n <= 3 * args.f
    _err(f"explored {result.schedules:,} schedules ({result.states:,} distinct states); "
         f"{result.violating_schedules:,} violate a property")
    for check in result.verdict.failures():
        _err(f"  {check.name}: {check.witness}")
    if args.expect_fail:
        return EXIT_PASS if violations else EXIT_FAIL
    if violations and not control:
        return EXIT_FAIL
    return EXIT_PASS


def cmd_demo(args) -> int:
    try:
        result = run_partition_demo(args.block_size, args.cross_delay, args.seed)
    except (ValueError, ScenarioError) as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    _write(result.report_json(), args.out)
    _err(partition_summary(result))
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idonly", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("file")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--out", help="write the JSON report here instead of stdout")
    run.add_argument("--trace", help="dump every delivery as JSON lines to this file")
    run.add_argument("--wall-time", action="store_true", help="include wall time in the report")
    run.set_defaults(func=cmd_run)

    suite = sub.add_parser("suite", help="run every *.json scenario in a directory")
    suite.add_argument("dir")
    suite.add_argument("--jobs", type=int, default=1)
    suite.add_argument("--out-dir", help="write one report per scenario here")
    suite.set_defaults(func=cmd_suite)

    explore = sub.add_parser("explore", help="exhaustively explore reliable broadcast")
    explore.add_argument("--n", type=int, default=4)
    explore.add_argument("--f", type=int, default=1)
    explore.add_argument("--horizon", type=int, default=6)
    explore.add_argument("--byzantine-sender", action="store_true")
    explore.add_argument("--expect-fail", action="store_true",
                         help="succeed only if a violation is found")
    explore.add_argument("--cap", type=int, default=DEFAULT_CAP,
                         help="refuse when the work estimate exceeds this")
    explore.add_argument("--out", help="write the JSON result here instead of stdout")
    explore.set_defaults(func=cmd_explore)

    demo = sub.add_parser("demo", help="demonstrations")
    demo_sub = demo.add_subparsers(dest="demo", required=True)
    part = demo_sub.add_parser("partition", help="two late-connected blocks decide differently")
    part.add_argument("--block-size", type=int, default=4)
    part.add_argument("--cross-delay", type=int, help="rounds for a cross-block message")
    part.add_argument("--seed", type=int, default=0)
    part.add_argument("--out", help="write the JSON report here instead of stdout")
    part.set_defaults(func=cmd_demo)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    if getattr(args, "jobs", 1) < 1:
        _err("error: --jobs must be at least 1")
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
