"""Deterministic discrete-event simulation of the partially synchronous network.

Time is exact rationals, events pop in (time, insertion order), and every run
is a pure function of (config, seed, scenario): run the same inputs twice and
the traces match byte for byte.

Delivery rules: a correct process's message to itself arrives at the same
timestamp, ordered after the event that produced it. Between distinct correct
processes the latency model picks a delay in (0, delta]; the adversary may
override it, to anything finite before GST, within (0, delta] after. Violating
either bound raises IllegalDelay at scheduling time, not delivery time.
Byzantine processes send through the adversary context, which only signs as
the Byzantine set (IllegalForgery otherwise); relaying honestly signed
material it has seen is allowed, creating signatures is not.

The loop drains until the queue is empty or the next event lies past the
horizon. Decided processes keep their view timers running so stragglers can
still assemble view-entry quorums; once every correct process has decided,
pending timers are retired unfired and the queue settles. An undecided correct
process always has a timer pending, so a drained queue means every correct
process decided.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction
from random import Random
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

from .core import (
    CRASH,
    DECIDE,
    DELIVER,
    ENTER_VIEW,
    SEND,
    Message,
    ProcessId,
    Time,
    TraceEvent,
    Value,
    ViewNumber,
    msg_from_obj,
    msg_to_obj,
)
from .crypto import KeyDirectory
from .node import REC_DECIDE, REC_ENTER_VIEW, Node
from .quorums import QuorumConfig, new_config


class IllegalDelay(Exception):
    pass


class IllegalForgery(Exception):
    pass


class HorizonExceeded(Exception):
    """Raised only by helpers that demand a complete run; run() itself flags."""


# Latency models. sample() must return a delay in (0, delta]; the simulator
# validates at scheduling time, so a misconfigured model fails loudly.


class Fixed:
    def __init__(self, d: Time) -> None:
        self.d = Fraction(d)

    def sample(self, rng: Random) -> Time:
        return self.d

    def describe(self) -> dict:
        return {"kind": "fixed", "d": str(self.d)}


class UniformRandom:
    """Uniform over a 64-step grid on (lo, hi]; rational, never zero."""

    _GRID = 64

    def __init__(self, lo: Time, hi: Time) -> None:
        self.lo = Fraction(lo)
        self.hi = Fraction(hi)

    def sample(self, rng: Random) -> Time:
        return self.lo + (self.hi - self.lo) * Fraction(rng.randint(1, self._GRID), self._GRID)

    def describe(self) -> dict:
        return {"kind": "uniform", "lo": str(self.lo), "hi": str(self.hi)}


class Scripted:
    """Adversary-driven delays over a fallback model for unscripted messages."""

    def __init__(self, fallback: Optional[object] = None) -> None:
        self.fallback = fallback if fallback is not None else Fixed(1)

    def sample(self, rng: Random) -> Time:
        return self.fallback.sample(rng)

    def describe(self) -> dict:
        return {"kind": "scripted", "fallback": self.fallback.describe()}


def latency_from_obj(obj: dict):
    kind = obj["kind"]
    if kind == "fixed":
        return Fixed(Fraction(obj["d"]))
    if kind == "uniform":
        return UniformRandom(Fraction(obj["lo"]), Fraction(obj["hi"]))
    if kind == "scripted":
        return Scripted(latency_from_obj(obj["fallback"]))
    raise ValueError(f"unknown latency model {kind!r}")


@dataclass(slots=True)
class SimConfig:
    delta: Time
    gst: Time
    horizon: Time
    seed: int
    latency: object

    def __post_init__(self) -> None:
        self.delta = Fraction(self.delta)
        self.gst = Fraction(self.gst)
        self.horizon = Fraction(self.horizon)


@dataclass(slots=True)
class Trace:
    """What the checker consumes: run metadata plus the ordered events."""

    meta: dict
    events: List[TraceEvent]


@dataclass(slots=True)
class RunResult:
    cfg: QuorumConfig
    sim: SimConfig
    inputs: Dict[ProcessId, Value]
    byz_ids: Tuple[ProcessId, ...]
    events: List[TraceEvent]
    decided: Dict[ProcessId, Tuple[Value, ViewNumber]]
    decide_times: Dict[ProcessId, Time]
    horizon_exceeded: bool

    def trace(self) -> Trace:
        meta = {
            "n": self.cfg.n,
            "f": self.cfg.f,
            "t": self.cfg.t,
            "mode": self.cfg.mode,
            "delta": str(self.sim.delta),
            "gst": str(self.sim.gst),
            "horizon": str(self.sim.horizon),
            "seed": self.sim.seed,
            "latency": self.sim.latency.describe(),
            "byz": list(self.byz_ids),
            "inputs": {str(p): v.hex() for p, v in sorted(self.inputs.items())},
        }
        return Trace(meta, self.events)


class AdversaryContext:
    """The adversary's entire surface onto the simulation.

    Everything a Byzantine script can do goes through here, which is what
    makes the forgery and delay rules enforceable in one place.
    """

    def __init__(self, sim: "Simulation") -> None:
        self._sim = sim
        self.cfg = sim.cfg
        self.delta = sim.sim.delta
        self.gst = sim.sim.gst
        self.byz_ids = sim.byz_ids
        self.directory = sim.directory
        self.inputs = dict(sim.inputs)
        self.rng = Random(sim.sim.seed + 1)

    @property
    def now(self) -> Time:
        return self._sim.now

    def sign_as(self, pid: ProcessId, payload: bytes) -> bytes:
        if pid not in self.byz_ids:
            raise IllegalForgery(f"process {pid} is not Byzantine; cannot sign as it")
        return self.directory.sign(pid, payload)

    def send(self, src: ProcessId, dst: ProcessId, msg: Message, deliver_at: Optional[Time] = None) -> int:
        if src not in self.byz_ids:
            raise IllegalForgery(f"process {src} is not Byzantine; cannot emit as it")
        return self._sim.send(src, dst, msg, deliver_at=deliver_at, from_adversary=True)

    def broadcast(self, src: ProcessId, msg: Message, deliver_at: Optional[Time] = None) -> List[int]:
        return [self.send(src, dst, msg, deliver_at) for dst in range(1, self.cfg.n + 1)]

    def delay(self, msg_id: int, until: Time) -> None:
        self._sim.delay(msg_id, Fraction(until))

    def at(self, time: Time, fn: Callable[[Time], None]) -> None:
        self._sim.schedule_wake(Fraction(time), fn)

    def crash(self, pid: ProcessId) -> None:
        if pid not in self.byz_ids:
            raise IllegalForgery(f"process {pid} is not Byzantine; cannot crash it")
        self._sim.record(TraceEvent(self._sim.now, CRASH, pid))


class Simulation:
    def __init__(
        self,
        cfg: QuorumConfig,
        sim: SimConfig,
        inputs: Dict[ProcessId, Value],
        adversary: Optional[object] = None,
        byz_ids: FrozenSet[ProcessId] = frozenset(),
        scheme: Optional[object] = None,
    ) -> None:
        if adversary is None and byz_ids:
            raise ValueError("byz_ids given without an adversary to drive them")
        self.cfg = cfg
        self.sim = sim
        self.inputs = dict(inputs)
        self.byz_ids = frozenset(byz_ids)
        self.adversary = adversary
        self.directory = KeyDirectory(cfg, sim.seed, scheme)
        self.rng = Random(sim.seed)
        self.now: Time = Fraction(0)
        base_timeout = 5 * sim.delta
        self.nodes: Dict[ProcessId, Node] = {
            pid: Node(pid, cfg, inputs[pid], self.directory, base_timeout)
            for pid in range(1, cfg.n + 1)
            if pid not in self.byz_ids
        }
        self.events: List[TraceEvent] = []
        self._heap: list = []
        self._seq = 0
        self._next_msg_id = 0
        # msg_id -> [deliver_time, src, dst, msg, delivered, send_time]
        self._pending: Dict[int, list] = {}
        self._wakes: Dict[int, Callable[[Time], None]] = {}
        self._decides: Dict[ProcessId, Tuple[Value, ViewNumber]] = {}
        self._decide_times: Dict[ProcessId, Time] = {}
        self.ctx = AdversaryContext(self)

    # Scheduling primitives.

    def _push(self, time: Time, kind: str, data) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, kind, data))

    def record(self, event: TraceEvent) -> None:
        self.events.append(event)

    def send(
        self,
        src: ProcessId,
        dst: ProcessId,
        msg: Message,
        deliver_at: Optional[Time] = None,
        from_adversary: bool = False,
    ) -> int:
        now = self.now
        self._next_msg_id += 1
        msg_id = self._next_msg_id
        self.record(TraceEvent(now, SEND, src, msg_id=msg_id, peer=dst, msg=msg))
        if src == dst:
            when = now
        elif deliver_at is not None:
            when = Fraction(deliver_at)
            if when < now:
                raise IllegalDelay(f"message {msg_id} scheduled in the past ({when} < {now})")
        else:
            when = now + self.sim.latency.sample(self.rng)
            self._check_delay(msg_id, src, dst, now, when)
        self._pending[msg_id] = [when, src, dst, msg, False, now]
        if src != dst and not from_adversary and self.adversary is not None:
            self.adversary.on_send(self.ctx, msg_id, src, dst, msg, now, when)
        self._push(self._pending[msg_id][0], "deliver", msg_id)
        return msg_id

    def _check_delay(self, msg_id: int, src: ProcessId, dst: ProcessId, sent: Time, when: Time) -> None:
        if src in self.byz_ids or dst in self.byz_ids:
            if when < sent:
                raise IllegalDelay(f"message {msg_id} delivered before it was sent")
            return
        delay = when - sent
        if delay <= 0:
            raise IllegalDelay(f"message {msg_id} needs a positive delay, got {delay}")
        if sent >= self.sim.gst and delay > self.sim.delta:
            raise IllegalDelay(
                f"message {msg_id} sent at {sent} (post-GST) delayed {delay} > delta {self.sim.delta}"
            )

    def delay(self, msg_id: int, until: Time) -> None:
        entry = self._pending.get(msg_id)
        if entry is None:
            raise IllegalDelay(f"unknown message {msg_id}")
        if entry[4]:
            raise IllegalDelay(f"message {msg_id} already delivered")
        _, src, dst, _, _, sent = entry
        if src == dst:
            raise IllegalDelay("self-sends are instantaneous and cannot be delayed")
        if until < self.now:
            raise IllegalDelay(f"cannot reschedule message {msg_id} into the past")
        self._check_delay(msg_id, src, dst, sent, until)
        entry[0] = until
        self._push(until, "deliver", msg_id)

    def schedule_wake(self, time: Time, fn: Callable[[Time], None]) -> None:
        if time < self.now:
            raise IllegalDelay(f"wake at {time} is in the past")
        self._seq += 1
        wake_id = self._seq
        self._wakes[wake_id] = fn
        self._push(time, "wake", wake_id)

    # Node plumbing.

    def _dispatch(self, pid: ProcessId, res) -> None:
        for rec in res.records:
            if rec[0] == REC_DECIDE:
                _, value, view = rec
                self._decides[pid] = (value, view)
                self._decide_times[pid] = self.now
                self.record(TraceEvent(self.now, DECIDE, pid, value=value, view=view))
            else:
                self.record(TraceEvent(self.now, ENTER_VIEW, pid, view=rec[1]))
        for dest, msg in res.sends:
            if dest is None:
                for dst in range(1, self.cfg.n + 1):
                    self.send(pid, dst, msg)
            else:
                self.send(pid, dest, msg)
        if res.timer_at is not None:
            self._push(res.timer_at, "timer", pid)

    def _deliver(self, time: Time, msg_id: int) -> None:
        entry = self._pending[msg_id]
        if entry[4] or entry[0] != time:
            return  # superseded by a delay() reschedule
        entry[4] = True
        _, src, dst, msg, _, _ = entry
        event = TraceEvent(time, DELIVER, dst, msg_id=msg_id, peer=src, msg=msg)
        self.record(event)
        if dst in self.byz_ids:
            if self.adversary is not None:
                self.adversary.on_deliver(self.ctx, dst, msg_id, src, msg)
            return
        res = self.nodes[dst].handle_delivery(time, src, msg)
        event.note = res.note
        self._dispatch(dst, res)

    def run(self) -> RunResult:
        for pid in sorted(self.nodes):
            self._dispatch(pid, self.nodes[pid].start())
        if self.adversary is not None:
            self.adversary.start(self.ctx)
        horizon = self.sim.horizon
        while self._heap:
            time, _, kind, data = self._heap[0]
            if time > horizon:
                break
            heapq.heappop(self._heap)
            if kind == "timer" and len(self._decides) == len(self.nodes):
                continue  # consensus is complete everywhere; let traffic settle
            self.now = time
            if kind == "deliver":
                self._deliver(time, data)
            elif kind == "timer":
                res = self.nodes[data].on_timer(time)
                self._dispatch(data, res)
            else:
                fn = self._wakes.pop(data)
                fn(time)
        # An undecided correct process always holds a pending timer, so a
        # drained queue implies everyone correct decided; the flag is simply
        # whether anyone did not.
        horizon_exceeded = any(self.nodes[pid].decided is None for pid in self.nodes)
        return RunResult(
            cfg=self.cfg,
            sim=self.sim,
            inputs=self.inputs,
            byz_ids=tuple(sorted(self.byz_ids)),
            events=self.events,
            decided=dict(self._decides),
            decide_times=dict(self._decide_times),
            horizon_exceeded=horizon_exceeded,
        )


# Trace text format: one meta line, then one line per event:
#   <time> <kind> <actor> <json-detail>
# with times as exact rationals and byte fields hex-encoded inside the JSON.

TRACE_HEADER = "# fastbft-trace v1"


def _detail(ev: TraceEvent) -> dict:
    if ev.kind == SEND:
        return {"id": ev.msg_id, "to": ev.peer, "msg": msg_to_obj(ev.msg)}
    if ev.kind == DELIVER:
        d = {"id": ev.msg_id, "from": ev.peer, "msg": msg_to_obj(ev.msg)}
        if ev.note is not None:
            d["note"] = ev.note
        return d
    if ev.kind == DECIDE:
        return {"value": ev.value.hex(), "view": ev.view}
    if ev.kind == ENTER_VIEW:
        return {"view": ev.view}
    return {}


def trace_to_text(trace: Trace) -> str:
    lines = [TRACE_HEADER + " " + json.dumps(trace.meta, sort_keys=True, separators=(",", ":"))]
    for ev in trace.events:
        detail = json.dumps(_detail(ev), sort_keys=True, separators=(",", ":"))
        lines.append(f"{ev.time} {ev.kind} {ev.actor} {detail}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(TRACE_HEADER + " "):
        raise ValueError("not a trace: missing header line")
    meta = json.loads(lines[0][len(TRACE_HEADER) + 1 :])
    events: List[TraceEvent] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            time_s, kind, actor_s, detail_s = line.split(" ", 3)
            detail = json.loads(detail_s)
        except ValueError as exc:
            raise ValueError(f"trace line {i}: {exc}") from exc
        ev = TraceEvent(Fraction(time_s), kind, int(actor_s))
        if kind in (SEND, DELIVER):
            ev.msg_id = detail["id"]
            ev.peer = detail["to"] if kind == SEND else detail["from"]
            ev.msg = msg_from_obj(detail["msg"])
            ev.note = detail.get("note")
        elif kind == DECIDE:
            ev.value = bytes.fromhex(detail["value"])
            ev.view = detail["view"]
        elif kind == ENTER_VIEW:
            ev.view = detail["view"]
        elif kind != CRASH:
            raise ValueError(f"trace line {i}: unknown kind {kind!r}")
        events.append(ev)
    return Trace(meta, events)


def cfg_from_meta(meta: dict) -> QuorumConfig:
    return new_config(meta["n"], meta["f"], meta["t"], meta["mode"])


# Network audits. Both run over a finished trace and return human-readable
# violation strings; empty list means the property held.


def audit_delivery_bounds(trace: Trace) -> List[str]:
    """Correct-to-correct messages sent at or after GST arrive within (0, delta]."""
    byz = set(trace.meta["byz"])
    gst = Fraction(trace.meta["gst"])
    delta = Fraction(trace.meta["delta"])
    sends: Dict[int, TraceEvent] = {}
    out: List[str] = []
    for ev in trace.events:
        if ev.kind == SEND:
            sends[ev.msg_id] = ev
        elif ev.kind == DELIVER:
            s = sends.get(ev.msg_id)
            if s is None:
                continue
            if s.actor in byz or ev.actor in byz or s.actor == ev.actor:
                continue
            delay = ev.time - s.time
            if s.time >= gst and not (0 < delay <= delta):
                out.append(f"msg {ev.msg_id} {s.actor}->{ev.actor} sent {s.time} delivered {ev.time}: delay {delay}")
            elif s.time < gst and delay <= 0:
                out.append(f"msg {ev.msg_id} {s.actor}->{ev.actor} nonpositive delay {delay}")
    return out


def audit_reliability(trace: Trace, allow_in_flight: bool = False) -> List[str]:
    """No loss, no duplication, no creation, no payload alteration in transit."""
    sends: Dict[int, TraceEvent] = {}
    delivered: Dict[int, int] = {}
    out: List[str] = []
    for ev in trace.events:
        if ev.kind == SEND:
            if ev.msg_id in sends:
                out.append(f"msg id {ev.msg_id} sent twice")
            sends[ev.msg_id] = ev
        elif ev.kind == DELIVER:
            s = sends.get(ev.msg_id)
            if s is None:
                out.append(f"msg {ev.msg_id} delivered without a send (creation)")
                continue
            delivered[ev.msg_id] = delivered.get(ev.msg_id, 0) + 1
            if delivered[ev.msg_id] > 1:
                out.append(f"msg {ev.msg_id} delivered twice (duplication)")
            if ev.peer != s.actor or s.peer != ev.actor:
                out.append(f"msg {ev.msg_id} endpoints changed in transit")
            if msg_to_obj(ev.msg) != msg_to_obj(s.msg):
                out.append(f"msg {ev.msg_id} payload altered in transit")
            if ev.time < s.time:
                out.append(f"msg {ev.msg_id} delivered before sent")
    if not allow_in_flight:
        for msg_id, s in sends.items():
            if msg_id not in delivered:
                out.append(f"msg {msg_id} {s.actor}->{s.peer} sent at {s.time} never delivered (loss)")
    return out
