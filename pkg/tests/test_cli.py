"""End-to-end command-line tests driven through main()."""

import contextlib
import io

import pytest

from fastbft.cli import main
from fastbft.simnet import parse_trace

from conftest import SCENARIO_DIR

FAULT_FREE = str(SCENARIO_DIR / "fault_free_n4.scn")
SILENT_LEADER = str(SCENARIO_DIR / "silent_leader_n4.scn")

STALL = """\
name = stall
mode = vanilla
n = 4
f = 1
t = 1
delta = 1
gst = 0
horizon = 3
seed = 1
latency = fixed 1
inputs = A
byz 2 = silent
check = agreement termination
"""


def _run(argv):
    out = io.StringIO()
    err = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def test_run_reports_and_exits_zero():
    code, out, err = _run(["run", FAULT_FREE])
    assert code == 0
    assert err == ""
    assert out.startswith("result = pass\n")
    assert "decide 1 = A view 1 time 2" in out
    assert "# all 5 checks passed" in out


def test_run_writes_trace_and_report(tmp_path):
    trace_path = tmp_path / "run.trace"
    report_path = tmp_path / "run.report"
    code, out, _ = _run(
        ["run", FAULT_FREE, "--trace-out", str(trace_path), "--report-out", str(report_path)]
    )
    assert code == 0
    assert report_path.read_text() == out
    trace = parse_trace(trace_path.read_text())
    # the scenario's check list rides along so replay can reproduce the report
    assert trace.meta["checks"] == [
        "agreement",
        "weak_validity",
        "termination",
        "two_step",
        "certificates",
    ]


def test_replay_reproduces_the_run_report(tmp_path):
    trace_path = tmp_path / "run.trace"
    code, run_out, _ = _run(["run", FAULT_FREE, "--trace-out", str(trace_path)])
    assert code == 0
    code, replay_out, _ = _run(["replay", str(trace_path)])
    assert code == 0
    assert replay_out == run_out


def test_run_rejects_unparseable_scenario(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("name = x\nnot a scenario\n")
    code, out, err = _run(["run", str(bad)])
    assert code == 2
    assert out == ""
    assert err.startswith("error: ")


def test_run_rejects_missing_file(tmp_path):
    code, _, err = _run(["run", str(tmp_path / "nope.scn")])
    assert code == 2
    assert "error" in err


def test_run_horizon_exceeded_wins_over_check_failure(tmp_path):
    scn = tmp_path / "stall.scn"
    scn.write_text(STALL)
    code, out, err = _run(["run", str(scn)])
    assert code == 3
    assert out.startswith("result = fail\n")
    assert "horizon 3 exceeded before every correct process decided" in err


def test_replay_rejects_garbage(tmp_path):
    bad = tmp_path / "junk.trace"
    bad.write_text("this is not a trace\n")
    code, _, err = _run(["replay", str(bad)])
    assert code == 2
    assert "malformed trace" in err


def test_replay_detects_tampered_decision(tmp_path):
    trace_path = tmp_path / "run.trace"
    _run(["run", FAULT_FREE, "--trace-out", str(trace_path)])
    lines = trace_path.read_text().splitlines()
    victim = next(i for i, l in enumerate(lines) if " decide " in l)
    lines[victim] = lines[victim].replace('"41"', '"42"')
    tampered = tmp_path / "tampered.trace"
    tampered.write_text("\n".join(lines) + "\n")
    code, out, _ = _run(["replay", str(tampered)])
    assert code == 1
    assert "check agreement = fail" in out


def test_replay_check_override(tmp_path):
    trace_path = tmp_path / "slow.trace"
    _run(["run", SILENT_LEADER, "--trace-out", str(trace_path)])
    code, _, _ = _run(["replay", str(trace_path)])
    assert code == 0  # the stored checks omit two_step on purpose
    code, out, _ = _run(["replay", str(trace_path), "--check", "two_step"])
    assert code == 1
    assert "check two_step = fail" in out


def test_replay_rejects_unknown_check_name(tmp_path):
    with pytest.raises(SystemExit):
        with contextlib.redirect_stderr(io.StringIO()):
            main(["replay", str(tmp_path / "x.trace"), "--check", "liveness"])


def test_matrix_marks_infeasible_cells():
    code, out, _ = _run(
        ["matrix", "--n-range", "8:9", "--f-range", "2", "--t-range", "2", "--seeds", "2"]
    )
    assert code == 0
    lines = [l.rstrip() for l in out.splitlines()]
    assert lines[0] == "  n   f   t mode         result"
    assert lines[1] == "  8   2   2 -            infeasible (n < 5f-1 = 9)"
    assert lines[2].startswith("  9   2   2 vanilla      2/2 passed, mean latency ")


def test_matrix_explicit_mode():
    code, out, _ = _run(
        ["matrix", "--n-range", "7", "--f-range", "2", "--t-range", "1",
         "--seeds", "1", "--mode", "generalized"]
    )
    assert code == 0
    assert "  7   2   1 generalized  1/1 passed" in out


def test_matrix_infeasible_generalized_bound():
    code, out, _ = _run(
        ["matrix", "--n-range", "6", "--f-range", "2", "--t-range", "1", "--seeds", "1"]
    )
    assert code == 0
    assert "infeasible (n < 3f+2t-1 = 7)" in out


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit):
        with contextlib.redirect_stderr(io.StringIO()):
            main([])
