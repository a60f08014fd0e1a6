"""Command-line front end: run scenarios, sweep configurations, replay traces.

Exit codes for `run`: 0 all requested checks passed, 1 a check or audit
failed, 2 the scenario file did not parse, 3 the run hit its horizon with
some correct process undecided. `replay` uses 0/1/2 the same way; `matrix`
exits 1 if any cell had a failing run.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

from .checker import KNOWN_CHECKS, format_report, run_checks
from .quorums import new_config
from .scenarios import ScenarioError, fuzz_scenario, load_scenario, run_scenario
from .simnet import parse_trace, trace_to_text

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_HORIZON = 3


def _cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    result = run_scenario(scenario)
    trace = result.trace()
    # Stash the scenario's check list so a later replay reproduces this report.
    trace.meta["checks"] = list(scenario.checks)
    if args.trace_out:
        with open(args.trace_out, "w") as handle:
            handle.write(trace_to_text(trace))
    report = run_checks(trace, scenario.checks)
    text = format_report(report)
    if args.report_out:
        with open(args.report_out, "w") as handle:
            handle.write(text)
    print(text, end="")
    if result.horizon_exceeded:
        print(f"error: horizon {scenario.horizon} exceeded before every correct process decided", file=sys.stderr)
        return EXIT_HORIZON
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_replay(args) -> int:
    try:
        with open(args.trace) as handle:
            trace = parse_trace(handle.read())
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: malformed trace: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    checks = args.check or trace.meta.get("checks") or ["agreement", "termination"]
    try:
        report = run_checks(trace, checks)
    except (ValueError, KeyError) as exc:
        print(f"error: malformed trace: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    text = format_report(report)
    if args.report_out:
        with open(args.report_out, "w") as handle:
            handle.write(text)
    print(text, end="")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _parse_range(spec: str) -> List[int]:
    lo, sep, hi = spec.partition(":")
    if not sep:
        return [int(lo)]
    return list(range(int(lo), int(hi) + 1))


def _feasible_mode(n: int, f: int, t: int, requested: str) -> Optional[str]:
    modes = ("vanilla", "generalized") if requested == "auto" else (requested,)
    for mode in modes:
        try:
            new_config(n, f, t, mode)
            return mode
        except ValueError:
            continue
    return None


def _infeasible_reason(n: int, f: int, t: int) -> str:
    if t == f and n < 5 * f - 1:
        return f"infeasible (n < 5f-1 = {5 * f - 1})"
    if n < 3 * f + 2 * t - 1:
        return f"infeasible (n < 3f+2t-1 = {3 * f + 2 * t - 1})"
    try:
        new_config(n, f, t, "generalized")
    except ValueError as exc:
        return f"infeasible ({exc})"
    return "infeasible"


def _cmd_matrix(args) -> int:
    rows = []
    any_failed = False
    for n in _parse_range(args.n_range):
        for f in _parse_range(args.f_range):
            for t in _parse_range(args.t_range):
                mode = _feasible_mode(n, f, t, args.mode)
                if mode is None:
                    rows.append((n, f, t, "-", _infeasible_reason(n, f, t)))
                    continue
                passed = 0
                latencies: List[Fraction] = []
                for seed in range(args.seeds):
                    scenario = fuzz_scenario(n, f, t, seed)
                    result = run_scenario(scenario)
                    trace = result.trace()
                    report = run_checks(trace, scenario.checks)
                    ok = report.passed and not result.horizon_exceeded
                    passed += ok
                    latencies.extend(report.delta_units.values())
                if passed != args.seeds:
                    any_failed = True
                mean = sum(latencies) / len(latencies) if latencies else Fraction(0)
                rows.append((n, f, t, mode, f"{passed}/{args.seeds} passed, mean latency {float(mean):.2f} delta"))
    width = max(len(r[4]) for r in rows)
    print(f"{'n':>3} {'f':>3} {'t':>3} {'mode':<12} result")
    for n, f, t, mode, summary in rows:
        print(f"{n:>3} {f:>3} {t:>3} {mode:<12} {summary:<{width}}")
    return EXIT_CHECK_FAILED if any_failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastbft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario file, check it, and report")
    run_p.add_argument("scenario", help="path to a .scn scenario file")
    run_p.add_argument("--trace-out", help="write the trace to this file")
    run_p.add_argument("--report-out", help="write the report to this file")
    run_p.set_defaults(func=_cmd_run)

    matrix_p = sub.add_parser("matrix", help="sweep configurations with fuzzed runs")
    matrix_p.add_argument("--n-range", required=True, help="N or LO:HI")
    matrix_p.add_argument("--f-range", required=True, help="F or LO:HI")
    matrix_p.add_argument("--t-range", required=True, help="T or LO:HI")
    matrix_p.add_argument("--seeds", type=int, default=10, help="runs per feasible cell")
    matrix_p.add_argument(
        "--mode",
        choices=("auto", "vanilla", "generalized"),
        default="auto",
        help="protocol mode; auto tries vanilla first where t = f",
    )
    matrix_p.set_defaults(func=_cmd_matrix)

    replay_p = sub.add_parser("replay", help="re-check a stored trace file")
    replay_p.add_argument("trace", help="path to a trace file")
    replay_p.add_argument(
        "--check",
        action="append",
        choices=KNOWN_CHECKS,
        help="check to run (repeatable); default: the checks stored with the trace",
    )
    replay_p.add_argument("--report-out", help="write the report to this file")
    replay_p.set_defaults(func=_cmd_replay)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
