"""Scenario grammar: parsing, byte-stable round trips, bundles, fuzzing."""

from fractions import Fraction

import pytest

from conftest import SCENARIO_DIR
from fastbft.checker import run_checks
from fastbft.scenarios import (
    BUNDLED,
    CHECK_NAMES,
    FUZZ_CONFIGS,
    ScenarioError,
    build,
    format_scenario,
    fuzz_scenario,
    load_scenario,
    parse_scenario,
    run_scenario,
)

MINIMAL = """\
name = tiny
mode = vanilla
n = 4
f = 1
t = 1
delta = 1
gst = 0
horizon = 40
seed = 1
latency = fixed 1
inputs = 0x0a
"""


def _mutate(key, replacement):
    lines = MINIMAL.splitlines()
    out = []
    for line in lines:
        if line.startswith(key + " "):
            out.append(replacement)
        else:
            out.append(line)
    return "\n".join(out) + "\n"


def test_parse_minimal():
    sc = parse_scenario(MINIMAL)
    assert (sc.name, sc.mode, sc.n, sc.f, sc.t) == ("tiny", "vanilla", 4, 1, 1)
    assert sc.default_input == b"\x0a"
    assert sc.delta == Fraction(1)
    assert sc.gst == Fraction(0)
    assert sc.checks == ("agreement", "termination")
    assert sc.byz == {} and sc.delays == ()


def test_missing_required_key_is_an_error():
    text = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith("seed"))
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert "seed" in str(err.value)


def test_round_trip_is_byte_stable():
    for builder in BUNDLED:
        sc = builder()
        text = format_scenario(sc)
        again = parse_scenario(text, source=sc.name)
        assert again == sc, sc.name
        assert format_scenario(again) == text, sc.name


def test_bundled_files_match_builders():
    on_disk = {p.stem: p for p in SCENARIO_DIR.glob("*.scn")}
    for builder in BUNDLED:
        sc = builder()
        assert sc.name in on_disk, f"missing scenarios/{sc.name}.scn"
        assert load_scenario(on_disk[sc.name]) == sc, sc.name
    # The lower-bound schedules are also checked in as files.
    for k in range(1, 6):
        assert f"rho{k}_f2t2" in on_disk
    assert len(on_disk) == 12


@pytest.mark.parametrize(
    "text,complaint,line",
    [
        (_mutate("mode", "mode = marble"), "mode must be vanilla or generalized", 2),
        (_mutate("n", "n = three"), "not an integer", 3),
        (_mutate("f", "f = 0"), "t <= f", None),
        (_mutate("horizon", "horizon = 0a0b"), "not a rational number", 8),
        (_mutate("latency", "latency = warp 3"), "latency must be", 10),
        (MINIMAL + "byz 9 = silent\n", "out of range", None),
        (MINIMAL + "byz 2 = shy\n", "unknown byz behavior", 12),
        (MINIMAL + "byz 2 = crash_at\n", "crash_at takes one time", 12),
        (MINIMAL + "byz 2 = equivocate 0a\n", "equivocate takes two values", 12),
        (
            MINIMAL + "byz 2 = mimic_on_propose 0a 0b\n",
            "mimic_on_propose takes two VALUE:DSTS groups",
            12,
        ),
        (MINIMAL + "delay = hold 1 2\n", "hold takes SRCS DSTS UNTIL", 12),
        (MINIMAL + "delay = warp 1 2\n", "unknown delay rule", 12),
        (MINIMAL + "check = liveness\n", "unknown check", 12),
        (MINIMAL + "seed = 9\n", "duplicate key", 12),
        (MINIMAL + "??\n", "key = value", 12),
        (
            MINIMAL + "byz 2 = propose 0a at 0\n",
            "propose syntax",
            12,
        ),
    ],
)
def test_parse_rejects_bad_lines(text, complaint, line):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text, source="bad.scn")
    assert complaint in str(err.value)
    assert "bad.scn" in str(err.value)
    if line is not None:
        assert err.value.line == line


def test_byz_behavior_conflicts_rejected():
    text = MINIMAL + "byz 2 = silent\nbyz 2 = ack 0a to 1 at 3\n"
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert "cannot combine" in str(err.value)


def test_too_many_byzantine_processes_rejected():
    text = MINIMAL + "byz 2 = silent\nbyz 3 = silent\n"
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert "exceeds f=1" in str(err.value)


def test_scripted_propose_beyond_view_one_rejected():
    text = MINIMAL + "byz 2 = propose 0a to 1 at 0 view 2\n"
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert "view 1 only" in str(err.value)


def test_build_produces_runnable_pieces():
    sc = parse_scenario(MINIMAL)
    built = build(sc)
    assert built.cfg.n == 4 and built.cfg.mode == "vanilla"
    assert built.adversary is None and built.byz_ids == frozenset()
    assert built.inputs == {p: b"\x0a" for p in range(1, 5)}


def test_per_process_inputs_override_default():
    sc = parse_scenario(MINIMAL + "input 3 = 0xff\n")
    built = build(sc)
    assert built.inputs[3] == b"\xff"
    assert built.inputs[1] == b"\x0a"


def test_run_scenario_fault_free():
    result = run_scenario(BUNDLED[0]())
    assert not result.horizon_exceeded
    assert len(result.decided) == 4


def test_bundled_scenarios_pass_their_checks():
    for builder in BUNDLED:
        sc = builder()
        report = run_checks(run_scenario(sc).trace(), sc.checks)
        assert report.passed, sc.name


def test_fuzz_scenarios_are_deterministic():
    a = fuzz_scenario(9, 2, 2, 123)
    b = fuzz_scenario(9, 2, 2, 123)
    assert a == b
    assert format_scenario(a) == format_scenario(b)
    assert fuzz_scenario(9, 2, 2, 124) != a


def test_fuzz_scenarios_vary_and_stay_legal():
    gsts = set()
    byz_counts = set()
    for seed in range(30):
        for (n, f, t) in FUZZ_CONFIGS:
            sc = fuzz_scenario(n, f, t, seed)
            assert sc.n == n and sc.f == f and sc.t == t
            assert len(sc.byz) <= f
            assert "agreement" in sc.checks and "termination" in sc.checks
            # Round trips hold for generated scenarios too.
            assert parse_scenario(format_scenario(sc)) == sc
            gsts.add(sc.gst)
            byz_counts.add(len(sc.byz))
    assert len(gsts) > 3
    assert byz_counts >= {0, 1}


def test_fuzz_run_passes_its_checks():
    sc = fuzz_scenario(4, 1, 1, 7)
    report = run_checks(run_scenario(sc).trace(), sc.checks)
    assert report.passed


def test_check_names_cover_the_checker():
    from fastbft.checker import KNOWN_CHECKS

    assert tuple(KNOWN_CHECKS) == tuple(CHECK_NAMES)
