"""Adversarial schedules built around the resilience bound.

Two families, both emitted as ordinary scenarios and replayed against the
real protocol as stress tests.

The crash family: every size-t set of non-leader processes follows the
protocol for one message delay and then stops. These runs must still decide
in two steps, which is the fast-path guarantee at its tightest.

The five-schedule family: a staircase of executions over a six-way split of
the processes (the first-view leader p, then groups P1..P5 of sizes t, f-1,
f-1, f-1, t). In schedule i the group Pi is Byzantine, p equivocates between
a zero-side and a one-side proposal, Byzantine groups echo value-matched
acks at P3 while feeding the rest the opposite story, and P3's traffic to
and from chosen groups is held until a late time T. One process short of
these group sizes the two stories would be forced apart; at the sizes run
here the protocol must survive every schedule, and P3's received bytes in
schedule 2 (resp. 4) must be indistinguishable from schedule 1 (resp. 5)
through time 2*delta.

The schedules run at exactly n = 3f+2t-1, which has one process more than
the six groups account for; that extra process is appended to group P2 as a
correct process, and its messages to P3 are held in schedules 1 and 2 (it
adopts the zero side from schedule 2 onward, so letting P3 hear it in either
schedule would separate the pair).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from .core import DELIVER, ProcessId, Time, Value, leader_of, msg_to_obj
from .quorums import QuorumConfig
from .scenarios import Scenario
from .simnet import Trace


class ConfigTooSmall(Exception):
    """The five-schedule group sizes are not realizable at this config."""


@dataclass(frozen=True)
class GroupPartition:
    """The six-way split the five-schedule family schedules against."""

    p: ProcessId
    extra: ProcessId
    p1: FrozenSet[ProcessId]
    p2: FrozenSet[ProcessId]
    p3: FrozenSet[ProcessId]
    p4: FrozenSet[ProcessId]
    p5: FrozenSet[ProcessId]

    def groups(self) -> Tuple[FrozenSet[ProcessId], ...]:
        return (self.p1, self.p2, self.p3, self.p4, self.p5)

    def all_pids(self) -> FrozenSet[ProcessId]:
        return frozenset({self.p, self.extra}).union(*self.groups())


def make_partition(cfg: QuorumConfig) -> GroupPartition:
    """Split 1..n with p = leader(1) and the extra process beside it.

    The leader of view 1 is process 2 and the leader of view 2 is process 3;
    putting process 1 in the extra slot and starting P1 at process 3 keeps
    the view-2 leader correct in every schedule that needs a view change.
    """

    if cfg.n != 3 * cfg.f + 2 * cfg.t - 1:
        raise ConfigTooSmall(
            f"schedules need n = 3f+2t-1 exactly, got n={cfg.n} f={cfg.f} t={cfg.t}"
        )
    p = leader_of(cfg, 1)
    extra = 1
    sizes = (cfg.t, cfg.f - 1, cfg.f - 1, cfg.f - 1, cfg.t)
    groups: List[FrozenSet[ProcessId]] = []
    cursor = 3
    for size in sizes:
        groups.append(frozenset(range(cursor, cursor + size)))
        cursor += size
    part = GroupPartition(p, extra, *groups)
    assert cursor - 1 == cfg.n and len(part.all_pids()) == cfg.n
    return part


# The crash family.


def generate_tfaulty(
    cfg: QuorumConfig,
    crashed: Sequence[ProcessId],
    inputs: Optional[Dict[ProcessId, Value]] = None,
    allow_leader: bool = False,
) -> Scenario:
    """One run where `crashed` follow the protocol until delta, then stop."""

    crashed = tuple(sorted(crashed))
    if len(crashed) != cfg.t:
        raise ValueError(f"crash set must have exactly t={cfg.t} processes, got {crashed}")
    if leader_of(cfg, 1) in crashed and not allow_leader:
        raise ValueError("crash set contains the first-view leader; pass allow_leader to run it")
    scenario = Scenario(
        name=f"tfaulty_f{cfg.f}t{cfg.t}_" + "_".join(str(pid) for pid in crashed),
        mode=cfg.mode,
        n=cfg.n,
        f=cfg.f,
        t=cfg.t,
        delta=Fraction(1),
        gst=Fraction(0),
        horizon=Fraction(100),
        seed=11,
        latency=("fixed", "1"),
        default_input=b"A",
        byz={pid: (("crash_at", "1"),) for pid in crashed},
        checks=("agreement", "termination") if leader_of(cfg, 1) in crashed else ("agreement", "termination", "two_step"),
    )
    if inputs:
        scenario.inputs = dict(inputs)
    return scenario


def tfaulty_family(cfg: QuorumConfig) -> Iterator[Scenario]:
    """Every size-t crash set avoiding the first-view leader."""

    others = [pid for pid in range(1, cfg.n + 1) if pid != leader_of(cfg, 1)]
    for crashed in combinations(others, cfg.t):
        yield generate_tfaulty(cfg, crashed)


# The five-schedule family.

HOLD_TIME = Fraction(10)


def _pids_token(pids: Sequence[ProcessId]) -> str:
    return ",".join(str(pid) for pid in sorted(pids))


def _mimic_line(value_to_p3: str, value_to_rest: str, p3: Sequence[ProcessId], rest: Sequence[ProcessId]) -> Tuple[Tuple[str, ...], ...]:
    return (
        (
            "mimic_on_propose",
            f"{value_to_p3}:{_pids_token(p3)}",
            f"{value_to_rest}:{_pids_token(rest)}",
        ),
    )


def generate_rho_schedule(cfg: QuorumConfig, which: int, input_zero: Value = b"0", input_one: Value = b"1") -> Scenario:
    """Schedule `which` in 1..5; the degenerate single schedule when t <= 1."""

    if which not in (1, 2, 3, 4, 5):
        raise ValueError(f"schedule index must be 1..5, got {which}")
    if cfg.t <= 1:
        return _degenerate_schedule(cfg, input_zero, input_one)
    part = make_partition(cfg)
    groups = part.groups()
    zero, one = _format_input(input_zero), _format_input(input_one)
    sigs = cfg.mode == "generalized"
    everyone = sorted(part.all_pids())
    p3 = sorted(part.p3)
    non_p3 = [pid for pid in everyone if pid not in part.p3]

    byz: Dict[ProcessId, Tuple[Tuple[str, ...], ...]] = {}
    delays: List[Tuple[str, ...]] = []
    gst = Fraction(0)
    hold = str(HOLD_TIME)

    if which in (1, 5):
        # p is correct and proposes its own input; the t-group crashes after
        # following the protocol for the first message delay.
        for pid in sorted(groups[which - 1]):
            byz[pid] = (("crash_at", "1"),)
        if which == 1:
            # P3 must stay unable to hear the extra process, which switches
            # sides between this schedule and the next. The hold must cover
            # everything the extra sends before the release, view traffic
            # included, and a hold is only legal for pre-GST sends, so GST
            # sits at the release time itself.
            delays.append(("hold", str(part.extra), _pids_token(p3), hold))
            gst = HOLD_TIME
    else:
        byz_group = sorted(groups[which - 1])
        # p equivocates: groups below the Byzantine one see the zero-side
        # proposal, groups above it see the one-side. The Byzantine group
        # itself rides on the zero-side list: the propose is what triggers
        # its split acks, and because group pids are contiguous the trigger
        # lands in the same scheduler slot a correct acker's propose would.
        low = sorted({pid for i in range(1, which) for pid in groups[i - 1]} | {part.extra} | set(byz_group))
        high = sorted({pid for i in range(which + 1, 6) for pid in groups[i - 1]})
        p_lines: List[Tuple[str, ...]] = []
        if low:
            p_lines.append(("propose", zero, "to", _pids_token(low), "at", "0"))
        if high:
            p_lines.append(("propose", one, "to", _pids_token(high), "at", "0"))
        if which != 3:
            # p backs the story P3 is meant to believe, exactly as the honest
            # p does in the matching outer schedule.
            story = one if which == 2 else zero
            p_lines.append(("ack", story, "to", _pids_token(p3), "at", "0"))
            if sigs:
                p_lines.append(("sig", story, "to", _pids_token(p3), "at", "0"))
        byz[part.p] = tuple(p_lines)

        if which == 2:
            for pid in byz_group:
                byz[pid] = _mimic_line(one, zero, p3, [q for q in non_p3 if q != pid])
            delays.append(("hold", _pids_token(sorted(part.p1)), _pids_token(p3), hold))
            delays.append(("hold", str(part.extra), _pids_token(p3), hold))
            delays.append(("hold", _pids_token(p3), _pids_token([q for q in everyone if q not in part.p3]), hold))
            gst = HOLD_TIME
        elif which == 3:
            for pid in byz_group:
                byz[pid] = (("silent",),)
            gst = Fraction(2)
        else:
            for pid in byz_group:
                byz[pid] = _mimic_line(zero, one, p3, [q for q in non_p3 if q != pid])
            delays.append(("hold", _pids_token(sorted(part.p5)), _pids_token(p3), hold))
            delays.append(("hold", _pids_token(p3), _pids_token([q for q in everyone if q not in part.p3]), hold))
            gst = HOLD_TIME

    scenario = Scenario(
        name=f"rho{which}_f{cfg.f}t{cfg.t}",
        mode=cfg.mode,
        n=cfg.n,
        f=cfg.f,
        t=cfg.t,
        delta=Fraction(1),
        gst=gst,
        horizon=Fraction(100),
        # One seed across the whole family: the indistinguishability claim
        # compares signature bytes, so every run must draw the same keys.
        seed=100,
        latency=("fixed", "1"),
        default_input=input_zero,
        byz=byz,
        delays=tuple(delays),
        checks=("agreement", "termination"),
    )
    if which == 1:
        scenario.inputs = {part.p: input_one}
    return scenario


def _format_input(value: Value) -> str:
    token = value.decode("utf-8", errors="replace")
    if token.isprintable() and " " not in token and token:
        return token
    return "0x" + value.hex()


def _degenerate_schedule(cfg: QuorumConfig, input_zero: Value, input_one: Value) -> Scenario:
    """For t <= 1 the staircase collapses; emit the lone equivocation run.

    The middle groups are empty, so the only adversarial content left is p
    splitting the two t-sized end groups (plus the extra) between the two
    proposals and staying silent afterwards.
    """

    p = leader_of(cfg, 1)
    others = [pid for pid in range(1, cfg.n + 1) if pid != p]
    half = len(others) // 2
    low, high = others[:half], others[half:]
    zero, one = _format_input(input_zero), _format_input(input_one)
    lines: List[Tuple[str, ...]] = []
    if low:
        lines.append(("propose", zero, "to", _pids_token(low), "at", "0"))
    if high:
        lines.append(("propose", one, "to", _pids_token(high), "at", "0"))
    return Scenario(
        name=f"rho_degenerate_f{cfg.f}t{cfg.t}",
        mode=cfg.mode,
        n=cfg.n,
        f=cfg.f,
        t=cfg.t,
        delta=Fraction(1),
        gst=Fraction(2),
        horizon=Fraction(100),
        seed=100,
        latency=("fixed", "1"),
        default_input=input_zero,
        byz={p: tuple(lines)},
        checks=("agreement", "termination"),
    )


def rho_family(cfg: QuorumConfig) -> Dict[int, Scenario]:
    return {which: generate_rho_schedule(cfg, which) for which in (1, 2, 3, 4, 5)}


# Indistinguishability projection: what one group heard, byte for byte.


def receive_projection(trace: Trace, receivers: FrozenSet[ProcessId], upto: Time) -> Tuple[Tuple[str, int, int, str], ...]:
    """Deliveries to `receivers` through `upto` as comparable rows.

    Message ids are internal bookkeeping and excluded. Rows sharing a
    timestamp are sorted by receiver, sender, and body: the relative order of
    same-instant deliveries is the scheduler's bookkeeping, not part of what
    a process can observe, so the projection canonicalizes it away. Times,
    endpoints, and the full serialized message must line up exactly.
    """

    keyed = []
    for event in trace.events:
        if event.kind != DELIVER or event.time > upto:
            continue
        if event.actor not in receivers:
            continue
        body = json.dumps(msg_to_obj(event.msg), sort_keys=True, separators=(",", ":"))
        keyed.append((Fraction(event.time), event.actor, event.peer, body))
    keyed.sort()
    return tuple((str(time), actor, peer, body) for time, actor, peer, body in keyed)


def diff_receive_projections(
    trace_a: Trace, trace_b: Trace, receivers: FrozenSet[ProcessId], upto: Time
) -> List[str]:
    """Human-readable mismatches between two projections; empty means equal."""

    rows_a = receive_projection(trace_a, receivers, upto)
    rows_b = receive_projection(trace_b, receivers, upto)
    problems = []
    for i, (row_a, row_b) in enumerate(zip(rows_a, rows_b)):
        if row_a != row_b:
            problems.append(f"row {i}: {row_a} != {row_b}")
    if len(rows_a) != len(rows_b):
        problems.append(f"row counts differ: {len(rows_a)} vs {len(rows_b)}")
    return problems
