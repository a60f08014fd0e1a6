"""Scenario files: one run of the simulator described as plain text.

A scenario file is line oriented. Blank lines and `#` comments are ignored;
every other line is `key = value`. Keys:

    name = churn_50_views
    mode = vanilla                  vanilla | generalized
    n = 4
    f = 1
    t = 1
    delta = 1                       times are Fractions ("1", "5/2")
    gst = 0
    horizon = 200
    seed = 1
    latency = fixed 1               or: uniform LO HI
    inputs = A                      default input for every process
    input 3 = B                     per-process override
    byz 2 = silent
    delay = chaos 0.5 8
    check = agreement termination

Values are tokens: encoded as UTF-8 bytes, or raw bytes via a 0x-prefixed
hex token. `byz P = ...` accepts one behavior per process, except the action
primitives, which may be repeated and combine into one script:

    silent | honest | crash_at T | equivocate VA VB
    mimic_on_propose V1:D,D,... V2:D,D,...
    equivocate_to V1:D,D,... V2:D,D,...
    propose V to D,D at T
    ack V to D,D at T [view W]
    sig V to D,D at T [view W]

`delay = ...` lines are ordered, first match wins:

    chaos PROB MAX_EXTRA_DELTAS
    hold_acks_until_gst
    hold SRCS DSTS UNTIL

`check = ...` names the trace checks the runner must pass for exit 0.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .adversary import (
    ActionScript,
    ChaosDelays,
    Composite,
    EquivocateScript,
    HoldAcksUntilGst,
    HoldRule,
    HonestScript,
    MimicAckScript,
    Script,
    SilentScript,
    TimedSend,
    split_values,
)
from .core import ProcessId, Value
from .quorums import QuorumConfig, new_config
from .simnet import Fixed, SimConfig, Simulation, UniformRandom

CHECK_NAMES = (
    "agreement",
    "weak_validity",
    "extended_validity",
    "termination",
    "two_step",
    "certificates",
)

_EXCLUSIVE_BEHAVIORS = ("silent", "honest", "crash_at", "equivocate", "mimic_on_propose")
_ACTION_BEHAVIORS = ("equivocate_to", "propose", "ack", "sig")


class ScenarioError(Exception):
    """Parse or validation failure, carrying file/line diagnostics."""

    def __init__(self, message: str, source: str = "<scenario>", line: Optional[int] = None) -> None:
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


@dataclass
class Scenario:
    """A parsed scenario, still token level so it serializes byte-stably."""

    name: str
    mode: str
    n: int
    f: int
    t: int
    delta: Fraction
    gst: Fraction
    horizon: Fraction
    seed: int
    latency: Tuple[str, ...]
    default_input: Optional[Value]
    inputs: Dict[ProcessId, Value] = field(default_factory=dict)
    byz: Dict[ProcessId, Tuple[Tuple[str, ...], ...]] = field(default_factory=dict)
    delays: Tuple[Tuple[str, ...], ...] = ()
    checks: Tuple[str, ...] = ("agreement", "termination")

    def input_for(self, pid: ProcessId) -> Value:
        got = self.inputs.get(pid, self.default_input)
        if got is None:
            raise ScenarioError(f"no input for process {pid} and no default")
        return got


@dataclass
class Built:
    """The runnable pieces a scenario materializes into."""

    cfg: QuorumConfig
    sim: SimConfig
    inputs: Dict[ProcessId, Value]
    adversary: Optional[Composite]
    byz_ids: frozenset


# Parsing.


def _parse_time(token: str, what: str, source: str, line: int) -> Fraction:
    try:
        value = Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ScenarioError(f"{what}: not a rational number: {token!r}", source, line) from None
    return value


def _parse_value(token: str, source: str, line: int) -> Value:
    if token.startswith("0x"):
        try:
            return bytes.fromhex(token[2:])
        except ValueError:
            raise ScenarioError(f"bad hex value {token!r}", source, line) from None
    return token.encode("utf-8")


def _parse_pids(token: str, source: str, line: int) -> Tuple[ProcessId, ...]:
    try:
        pids = tuple(int(part) for part in token.split(","))
    except ValueError:
        raise ScenarioError(f"bad process list {token!r}", source, line) from None
    if not pids:
        raise ScenarioError("empty process list", source, line)
    return pids


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Parse and validate; raises ScenarioError with line diagnostics."""

    fields: Dict[str, str] = {}
    field_lines: Dict[str, int] = {}
    inputs: Dict[int, Value] = {}
    byz: Dict[int, List[Tuple[str, ...]]] = {}
    delays: List[Tuple[str, ...]] = []
    checks: Optional[Tuple[str, ...]] = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ScenarioError(f"expected 'key = value', got {stripped!r}", source, lineno)
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not value:
            raise ScenarioError(f"empty value for {key!r}", source, lineno)
        parts = key.split()
        if parts[0] == "input" and len(parts) == 2:
            pid = int(parts[1]) if parts[1].isdigit() else None
            if pid is None:
                raise ScenarioError(f"bad process id {parts[1]!r}", source, lineno)
            inputs[pid] = _parse_value(value, source, lineno)
        elif parts[0] == "byz" and len(parts) == 2:
            pid = int(parts[1]) if parts[1].isdigit() else None
            if pid is None:
                raise ScenarioError(f"bad process id {parts[1]!r}", source, lineno)
            spec = tuple(value.split())
            _check_byz_spec(spec, byz.get(pid, []), source, lineno)
            byz.setdefault(pid, []).append(spec)
        elif key == "delay":
            spec = tuple(value.split())
            _check_delay_spec(spec, source, lineno)
            delays.append(spec)
        elif key == "check":
            names = tuple(value.split())
            for name in names:
                if name not in CHECK_NAMES:
                    raise ScenarioError(f"unknown check {name!r}", source, lineno)
            checks = names
        elif len(parts) == 1:
            if key in fields:
                raise ScenarioError(f"duplicate key {key!r}", source, lineno)
            fields[key] = value
            field_lines[key] = lineno
        else:
            raise ScenarioError(f"unknown key {key!r}", source, lineno)

    def need(key: str) -> str:
        if key not in fields:
            raise ScenarioError(f"missing required key {key!r}", source)
        return fields[key]

    def need_int(key: str) -> int:
        raw = need(key)
        try:
            return int(raw)
        except ValueError:
            raise ScenarioError(f"{key}: not an integer: {raw!r}", source, field_lines[key]) from None

    mode = need("mode")
    if mode not in ("vanilla", "generalized"):
        raise ScenarioError(f"mode must be vanilla or generalized, got {mode!r}", source, field_lines["mode"])
    latency = tuple(need("latency").split())
    _check_latency_spec(latency, source, field_lines["latency"])

    scenario = Scenario(
        name=need("name"),
        mode=mode,
        n=need_int("n"),
        f=need_int("f"),
        t=need_int("t"),
        delta=_parse_time(need("delta"), "delta", source, field_lines["delta"]),
        gst=_parse_time(need("gst"), "gst", source, field_lines["gst"]),
        horizon=_parse_time(need("horizon"), "horizon", source, field_lines["horizon"]),
        seed=need_int("seed"),
        latency=latency,
        default_input=_parse_value(fields["inputs"], source, field_lines["inputs"]) if "inputs" in fields else None,
        inputs=inputs,
        byz={pid: tuple(specs) for pid, specs in byz.items()},
        delays=tuple(delays),
        checks=checks if checks is not None else ("agreement", "termination"),
    )
    for unknown in set(fields) - {"name", "mode", "n", "f", "t", "delta", "gst", "horizon", "seed", "latency", "inputs"}:
        raise ScenarioError(f"unknown key {unknown!r}", source, field_lines[unknown])
    try:
        build(scenario, source)
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError(f"invalid scenario: {exc}", source) from exc
    return scenario


def _check_byz_spec(spec: Tuple[str, ...], prior: List[Tuple[str, ...]], source: str, line: int) -> None:
    head = spec[0]
    if head in _EXCLUSIVE_BEHAVIORS:
        if prior:
            raise ScenarioError(f"{head!r} cannot combine with other byz lines", source, line)
    elif head in _ACTION_BEHAVIORS:
        if any(p[0] in _EXCLUSIVE_BEHAVIORS for p in prior):
            raise ScenarioError(f"{head!r} cannot combine with {prior[0][0]!r}", source, line)
    else:
        raise ScenarioError(f"unknown byz behavior {head!r}", source, line)
    if head == "crash_at" and len(spec) != 2:
        raise ScenarioError("crash_at takes one time", source, line)
    if head == "equivocate" and len(spec) != 3:
        raise ScenarioError("equivocate takes two values", source, line)
    if head == "mimic_on_propose" and (len(spec) != 3 or any(":" not in g for g in spec[1:])):
        raise ScenarioError("mimic_on_propose takes two VALUE:DSTS groups", source, line)
    if head == "equivocate_to" and len(spec) < 2:
        raise ScenarioError("equivocate_to takes VALUE:DSTS groups", source, line)
    if head in ("propose", "ack", "sig"):
        if len(spec) < 6 or spec[2] != "to" or spec[4] != "at":
            raise ScenarioError(f"{head} syntax: {head} V to DSTS at T [view W]", source, line)
        if len(spec) not in (6, 8) or (len(spec) == 8 and spec[6] != "view"):
            raise ScenarioError(f"{head} syntax: {head} V to DSTS at T [view W]", source, line)
        if head == "propose" and len(spec) == 8 and spec[7] != "1":
            raise ScenarioError("scripted proposes support view 1 only", source, line)


def _check_delay_spec(spec: Tuple[str, ...], source: str, line: int) -> None:
    head = spec[0]
    if head == "chaos":
        if len(spec) != 3:
            raise ScenarioError("chaos takes PROB MAX_EXTRA_DELTAS", source, line)
    elif head == "hold_acks_until_gst":
        if len(spec) != 1:
            raise ScenarioError("hold_acks_until_gst takes no arguments", source, line)
    elif head == "hold":
        if len(spec) != 4:
            raise ScenarioError("hold takes SRCS DSTS UNTIL", source, line)
    else:
        raise ScenarioError(f"unknown delay rule {head!r}", source, line)


def _check_latency_spec(spec: Tuple[str, ...], source: str, line: int) -> None:
    if spec[0] == "fixed" and len(spec) == 2:
        return
    if spec[0] == "uniform" and len(spec) == 3:
        return
    raise ScenarioError(f"latency must be 'fixed D' or 'uniform LO HI', got {' '.join(spec)!r}", source, line)


# Materialization.


def _build_script(pid: int, specs: Tuple[Tuple[str, ...], ...], source: str) -> Script:
    head = specs[0][0]
    if head == "silent":
        return SilentScript()
    if head == "honest":
        return HonestScript()
    if head == "crash_at":
        return HonestScript(crash_at=Fraction(specs[0][1]))
    if head == "equivocate":
        value_a = _parse_value(specs[0][1], source, 0)
        value_b = _parse_value(specs[0][2], source, 0)
        return EquivocateScript(split_values(value_a, value_b))
    if head == "mimic_on_propose":
        groups = []
        for group in specs[0][1:]:
            token, _, dsts = group.partition(":")
            groups.append((_parse_value(token, source, 0), _parse_pids(dsts, source, 0)))
        return MimicAckScript(groups[0][0], groups[0][1], groups[1][0], groups[1][1])
    actions: List[TimedSend] = []
    for spec in specs:
        if spec[0] == "equivocate_to":
            for group in spec[1:]:
                token, _, dsts = group.partition(":")
                actions.append(
                    TimedSend(Fraction(0), "propose", _parse_value(token, source, 0), _parse_pids(dsts, source, 0))
                )
        else:
            view = int(spec[7]) if len(spec) == 8 else 1
            actions.append(
                TimedSend(
                    Fraction(spec[5]),
                    spec[0],
                    _parse_value(spec[1], source, 0),
                    _parse_pids(spec[3], source, 0),
                    view,
                )
            )
    return ActionScript(actions)


def _build_delay(spec: Tuple[str, ...], source: str):
    if spec[0] == "chaos":
        return ChaosDelays(prob=float(spec[1]), max_extra_deltas=int(spec[2]))
    if spec[0] == "hold_acks_until_gst":
        return HoldAcksUntilGst()
    return HoldRule(_parse_pids(spec[1], source, 0), _parse_pids(spec[2], source, 0), Fraction(spec[3]))


def build(scenario: Scenario, source: str = "<scenario>") -> Built:
    """Materialize a Scenario into the pieces Simulation wants."""

    cfg = new_config(scenario.n, scenario.f, scenario.t, scenario.mode)
    if scenario.latency[0] == "fixed":
        latency = Fixed(Fraction(scenario.latency[1]))
    else:
        latency = UniformRandom(Fraction(scenario.latency[1]), Fraction(scenario.latency[2]))
    sim = SimConfig(
        delta=scenario.delta,
        gst=scenario.gst,
        horizon=scenario.horizon,
        seed=scenario.seed,
        latency=latency,
    )
    inputs = {pid: scenario.input_for(pid) for pid in range(1, cfg.n + 1)}
    for pid in scenario.inputs:
        if not 1 <= pid <= cfg.n:
            raise ScenarioError(f"input for process {pid} out of range 1..{cfg.n}", source)
    for pid in scenario.byz:
        if not 1 <= pid <= cfg.n:
            raise ScenarioError(f"byz process {pid} out of range 1..{cfg.n}", source)
    if len(scenario.byz) > cfg.f:
        raise ScenarioError(f"{len(scenario.byz)} Byzantine processes exceeds f={cfg.f}", source)

    adversary = None
    byz_ids = frozenset(scenario.byz)
    if scenario.byz or scenario.delays:
        scripts = {pid: _build_script(pid, specs, source) for pid, specs in scenario.byz.items()}
        rules = [_build_delay(spec, source) for spec in scenario.delays]
        adversary = Composite(scripts, rules)
    return Built(cfg=cfg, sim=sim, inputs=inputs, adversary=adversary, byz_ids=byz_ids)


def run_scenario(scenario: Scenario):
    """Build and run; returns the simnet RunResult."""

    built = build(scenario)
    return Simulation(
        built.cfg, built.sim, built.inputs, built.adversary, built.byz_ids
    ).run()


# Serialization back to text.


def _format_value(value: Value) -> str:
    token = value.decode("utf-8", errors="replace")
    if token.isprintable() and " " not in token and token and not token.startswith("0x"):
        return token
    return "0x" + value.hex()


def format_scenario(scenario: Scenario) -> str:
    lines = [
        f"name = {scenario.name}",
        f"mode = {scenario.mode}",
        f"n = {scenario.n}",
        f"f = {scenario.f}",
        f"t = {scenario.t}",
        f"delta = {scenario.delta}",
        f"gst = {scenario.gst}",
        f"horizon = {scenario.horizon}",
        f"seed = {scenario.seed}",
        f"latency = {' '.join(scenario.latency)}",
    ]
    if scenario.default_input is not None:
        lines.append(f"inputs = {_format_value(scenario.default_input)}")
    for pid in sorted(scenario.inputs):
        lines.append(f"input {pid} = {_format_value(scenario.inputs[pid])}")
    for pid in sorted(scenario.byz):
        for spec in scenario.byz[pid]:
            lines.append(f"byz {pid} = {' '.join(spec)}")
    for spec in scenario.delays:
        lines.append(f"delay = {' '.join(spec)}")
    lines.append(f"check = {' '.join(scenario.checks)}")
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), source=str(path))


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(format_scenario(scenario))


# The bundled library (the five adversarial-schedule scenarios live next to
# their generators in lower_bound.py).


def fault_free_n4() -> Scenario:
    return Scenario(
        name="fault_free_n4",
        mode="vanilla",
        n=4,
        f=1,
        t=1,
        delta=Fraction(1),
        gst=Fraction(0),
        horizon=Fraction(100),
        seed=1,
        latency=("fixed", "1"),
        default_input=b"A",
        checks=("agreement", "weak_validity", "termination", "two_step", "certificates"),
    )


def tfaulty_crash_n4() -> Scenario:
    return Scenario(
        name="tfaulty_crash_n4",
        mode="vanilla",
        n=4,
        f=1,
        t=1,
        delta=Fraction(1),
        gst=Fraction(0),
        horizon=Fraction(100),
        seed=2,
        latency=("fixed", "1"),
        default_input=b"A",
        byz={3: (("crash_at", "1"),)},
        checks=("agreement", "termination", "two_step", "certificates"),
    )


def silent_leader_n4() -> Scenario:
    return Scenario(
        name="silent_leader_n4",
        mode="vanilla",
        n=4,
        f=1,
        t=1,
        delta=Fraction(1),
        gst=Fraction(0),
        horizon=Fraction(100),
        seed=3,
        latency=("fixed", "1"),
        default_input=b"A",
        byz={2: (("silent",),)},
        checks=("agreement", "termination", "certificates"),
    )


def equivocating_leader_n9() -> Scenario:
    return Scenario(
        name="equivocating_leader_n9",
        mode="vanilla",
        n=9,
        f=2,
        t=2,
        delta=Fraction(1),
        gst=Fraction(0),
        horizon=Fraction(200),
        seed=4,
        latency=("fixed", "1"),
        default_input=b"C",
        byz={2: (("equivocate", "A", "B"),), 9: (("silent",),)},
        checks=("agreement", "termination", "certificates"),
    )


def chaos_pre_gst_n9() -> Scenario:
    scenario = Scenario(
        name="chaos_pre_gst_n9",
        mode="vanilla",
        n=9,
        f=2,
        t=2,
        delta=Fraction(1),
        gst=Fraction(20),
        horizon=Fraction(600),
        seed=5,
        latency=("uniform", "1/2", "1"),
        default_input=b"A",
        delays=(("chaos", "0.7", "6"),),
        checks=("agreement", "extended_validity", "termination", "certificates"),
    )
    scenario.inputs = {pid: b"B" for pid in (2, 4, 6, 8)}
    return scenario


def slow_path_n7() -> Scenario:
    return Scenario(
        name="slow_path_n7",
        mode="generalized",
        n=7,
        f=2,
        t=1,
        delta=Fraction(1),
        gst=Fraction(0),
        horizon=Fraction(100),
        seed=6,
        latency=("fixed", "1"),
        default_input=b"A",
        byz={6: (("silent",),), 7: (("silent",),)},
        checks=("agreement", "termination", "certificates"),
    )


def churn_50_views() -> Scenario:
    # Timeouts double every view, so view k is entered near 5 * 2^(k-1); a
    # GST past view 51's entry churns the full fifty views before recovery.
    return Scenario(
        name="churn_50_views",
        mode="vanilla",
        n=4,
        f=1,
        t=1,
        delta=Fraction(1),
        gst=Fraction(6_000_000_000_000_000),
        horizon=Fraction(30_000_000_000_000_000),
        seed=7,
        latency=("fixed", "1"),
        default_input=b"A",
        byz={2: (("silent",),)},
        delays=(("hold_acks_until_gst",),),
        checks=("agreement", "termination", "certificates"),
    )


BUNDLED = (
    fault_free_n4,
    tfaulty_crash_n4,
    silent_leader_n4,
    equivocating_leader_n9,
    chaos_pre_gst_n9,
    slow_path_n7,
    churn_50_views,
)


# Randomized scenario generation for the fuzzing suite.

FUZZ_CONFIGS = ((4, 1, 1), (9, 2, 2), (7, 2, 1), (12, 3, 2))


def fuzz_scenario(n: int, f: int, t: int, seed: int) -> Scenario:
    """One randomized run: random faults, scripts, delays, GST, inputs."""

    rng = random.Random(seed * 1000003 + n * 1009 + f * 101 + t)
    if t == f:
        mode = rng.choice(("vanilla", "generalized"))
    else:
        mode = "generalized"
    delta = Fraction(1)
    gst = Fraction(0) if rng.random() < 2 / 3 else Fraction(rng.randint(1, 40))

    byz_count = rng.randint(0, f)
    byz_ids = sorted(rng.sample(range(1, n + 1), byz_count))
    byz: Dict[int, Tuple[Tuple[str, ...], ...]] = {}
    for pid in byz_ids:
        roll = rng.random()
        if roll < 0.3:
            byz[pid] = (("silent",),)
        elif roll < 0.6:
            byz[pid] = (("crash_at", str(Fraction(rng.randint(0, 12), 4))),)
        elif roll < 0.8:
            byz[pid] = (("honest",),)
        else:
            byz[pid] = (("equivocate", "A", "B"),)

    delays: List[Tuple[str, ...]] = []
    if gst > 0 and rng.random() < 0.5:
        delays.append(("chaos", "0.6", "6"))
    if gst > 0 and rng.random() < 0.2:
        delays.append(("hold_acks_until_gst",))

    if rng.random() < 0.5:
        default_input: Optional[Value] = b"A"
        overrides: Dict[int, Value] = {}
    else:
        default_input = b"A"
        overrides = {pid: b"B" for pid in range(1, n + 1) if rng.random() < 0.5}

    checks = ["agreement", "termination"]
    if not byz_ids:
        checks.append("extended_validity")
        if not overrides:
            checks.append("weak_validity")

    scenario = Scenario(
        name=f"fuzz_n{n}f{f}t{t}_{seed}",
        mode=mode,
        n=n,
        f=f,
        t=t,
        delta=delta,
        gst=gst,
        horizon=gst + 5000 * delta,
        seed=seed,
        latency=rng.choice((("fixed", "1"), ("uniform", "1/2", "1"), ("uniform", "1/4", "1"))),
        default_input=default_input,
        inputs=overrides,
        byz=byz,
        delays=tuple(delays),
        checks=tuple(checks),
    )
    return scenario
