"""Scripted Byzantine behaviors and adversarial delay rules.

An adversary drives every Byzantine process in a run through the context the
simulator hands it. The Composite adversary pairs one script per Byzantine
process with a list of delay rules applied to correct traffic; special-purpose
adversaries (the lower-bound schedules) implement the same three-hook
interface directly.

The ready-made scripts keep acks all-or-nothing: a Byzantine process either
acknowledges a value to everyone or to no one, staying inside the behaviors
the round-trip liveness argument covers most simply. Hand-built schedules
that need selective sends (the lower-bound family) use ActionScript and size
their horizons so the post-GST view change recovers every correct process.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .core import Ack, Message, ProcessId, Propose, Sig, Time, Value, ViewNumber
from .core import ack_payload, leader_of, propose_payload
from .core import BOTTOM
from .node import Node


class Adversary:
    """Hook surface the simulator calls; the base adversary does nothing."""

    def start(self, ctx) -> None:
        pass

    def on_deliver(self, ctx, byz_id: ProcessId, msg_id: int, src: ProcessId, msg: Message) -> None:
        pass

    def on_send(self, ctx, msg_id: int, src: ProcessId, dst: ProcessId, msg: Message, sent: Time, planned: Time) -> None:
        pass


class Script:
    """Per-process behavior inside a Composite adversary. Base = fully silent."""

    def start(self, ctx, pid: ProcessId) -> None:
        pass

    def on_deliver(self, ctx, pid: ProcessId, msg_id: int, src: ProcessId, msg: Message) -> None:
        pass


class SilentScript(Script):
    pass


class HonestScript(Script):
    """Runs the real node stack for a Byzantine slot, optionally crashing.

    Emissions at or after the crash instant are suppressed, so crash_at=d
    means the process behaves correctly through [0, d). crash_at=0 never
    even proposes. A rewrite hook may redirect or retime each outgoing
    message: it sees (ctx, pid, dest, msg) and returns a list of
    (dst, deliver_at) pairs, or None for the default full fanout.
    """

    def __init__(
        self,
        crash_at: Optional[Time] = None,
        rewrite: Optional[Callable] = None,
    ) -> None:
        self.crash_at = None if crash_at is None else Fraction(crash_at)
        self.rewrite = rewrite
        self.node: Optional[Node] = None
        self.crashed = False

    def start(self, ctx, pid: ProcessId) -> None:
        if self.crash_at is not None:
            ctx.at(max(self.crash_at, Fraction(0)), lambda now: self._crash(ctx, pid))
            if self.crash_at <= 0:
                return
        self.node = Node(pid, ctx.cfg, ctx.inputs[pid], ctx.directory, 5 * ctx.delta)
        self._forward(ctx, pid, self.node.start())

    def _crash(self, ctx, pid: ProcessId) -> None:
        self.crashed = True
        ctx.crash(pid)

    def _down(self, ctx) -> bool:
        # Compare times, not just the crash flag: a delivery scheduled for the
        # crash instant can pop before the crash wake does.
        if self.crashed or self.node is None:
            return True
        return self.crash_at is not None and ctx.now >= self.crash_at

    def on_deliver(self, ctx, pid: ProcessId, msg_id: int, src: ProcessId, msg: Message) -> None:
        if self._down(ctx):
            return
        self._forward(ctx, pid, self.node.handle_delivery(ctx.now, src, msg))

    def _timer(self, ctx, pid: ProcessId, now: Time) -> None:
        if self._down(ctx):
            return
        self._forward(ctx, pid, self.node.on_timer(now))

    def _forward(self, ctx, pid: ProcessId, res) -> None:
        # Inner decides and view entries stay private: Byzantine processes do
        # not contribute decide events to the trace.
        for dest, msg in res.sends:
            targets = None
            if self.rewrite is not None:
                targets = self.rewrite(ctx, pid, dest, msg)
            if targets is None:
                dsts = range(1, ctx.cfg.n + 1) if dest is None else (dest,)
                targets = [(d, None) for d in dsts]
            for dst, deliver_at in targets:
                ctx.send(pid, dst, msg, deliver_at=deliver_at)
        if res.timer_at is not None:
            ctx.at(res.timer_at, lambda now: self._timer(ctx, pid, now))


class EquivocateScript(Script):
    """If this process leads view 1, it proposes value_for(dst) to each dst.

    Sends nothing else, ever: no acks, no votes. The conflicting proposes are
    each signed for real (the process owns its key), which is exactly the
    equivocation evidence the selection rule handles. A dst mapped to None
    receives nothing.
    """

    def __init__(self, value_for: Callable[[ProcessId], Optional[Value]]) -> None:
        self.value_for = value_for

    def start(self, ctx, pid: ProcessId) -> None:
        if pid != leader_of(ctx.cfg, 1):
            return
        for dst in range(1, ctx.cfg.n + 1):
            value = self.value_for(dst)
            if value is None:
                continue
            sig = ctx.sign_as(pid, propose_payload(value, 1))
            ctx.send(pid, dst, Propose(value, 1, BOTTOM, sig))


def split_values(value_a: Value, value_b: Value) -> Callable[[ProcessId], Value]:
    """Odd process ids get value_a, even ids get value_b."""

    def pick(dst: ProcessId) -> Value:
        return value_a if dst % 2 else value_b

    return pick


@dataclass(frozen=True)
class TimedSend:
    """One scripted emission: at `time`, send a first-view message to each dst."""

    time: Fraction
    kind: str
    value: Value
    dsts: Tuple[ProcessId, ...]
    view: ViewNumber = 1


class ActionScript(Script):
    """Plays a fixed list of timed sends and is otherwise silent.

    Kinds: "propose" (view 1 only, BOTTOM certificate), "ack", "sig". This is
    the escape hatch for hand-built schedules; unlike the classes above it may
    ack selectively.
    """

    def __init__(self, actions: Sequence[TimedSend]) -> None:
        self.actions = tuple(actions)

    def start(self, ctx, pid: ProcessId) -> None:
        for action in self.actions:
            ctx.at(action.time, lambda now, a=action: self._fire(ctx, pid, a))

    def _fire(self, ctx, pid: ProcessId, action: TimedSend) -> None:
        if action.kind == "propose":
            if action.view != 1:
                raise ValueError("scripted proposes support view 1 only")
            sig = ctx.sign_as(pid, propose_payload(action.value, 1))
            msg: Message = Propose(action.value, 1, BOTTOM, sig)
        elif action.kind == "ack":
            msg = Ack(action.value, action.view)
        elif action.kind == "sig":
            share = ctx.sign_as(pid, ack_payload(action.value, action.view))
            msg = Sig(action.value, action.view, share)
        else:
            raise ValueError(f"unknown scripted send kind {action.kind!r}")
        for dst in action.dsts:
            ctx.send(pid, dst, msg)


class MimicAckScript(Script):
    """Acks the first view with a different value per destination group.

    Quiet until the first Propose arrives, then acks value_a to group_a and
    value_b to group_b, with matching signature shares in generalized mode.
    Triggering on the delivery (rather than a wall-clock wake) puts the acks
    in the same scheduler slot a correct acker's would occupy, so two runs
    that differ only in which side this process plays produce identically
    ordered windows. Later deliveries are ignored.
    """

    def __init__(
        self,
        value_a: Value,
        group_a: Iterable[ProcessId],
        value_b: Value,
        group_b: Iterable[ProcessId],
    ) -> None:
        self.batches = (
            (value_a, tuple(group_a)),
            (value_b, tuple(group_b)),
        )
        self.fired = False

    def on_deliver(self, ctx, pid: ProcessId, msg_id: int, src: ProcessId, msg: Message) -> None:
        if self.fired or not isinstance(msg, Propose):
            return
        self.fired = True
        for value, dsts in self.batches:
            ack = Ack(value, 1)
            for dst in dsts:
                ctx.send(pid, dst, ack)
        if ctx.cfg.mode == "generalized":
            for value, dsts in self.batches:
                share = ctx.sign_as(pid, ack_payload(value, 1))
                sig = Sig(value, 1, share)
                for dst in dsts:
                    ctx.send(pid, dst, sig)


class DelayRule:
    """Decides a replacement delivery time for a correct-sender message."""

    def maybe_delay(self, ctx, msg_id, src, dst, msg, sent: Time, planned: Time) -> Optional[Time]:
        return None


class ChaosDelays(DelayRule):
    """Random finite delays on pre-GST traffic; post-GST traffic untouched."""

    _GRID = 16

    def __init__(self, prob: float = 0.5, max_extra_deltas: int = 8) -> None:
        self.prob = prob
        self.max_extra = max_extra_deltas

    def maybe_delay(self, ctx, msg_id, src, dst, msg, sent, planned):
        if sent >= ctx.gst or ctx.rng.random() >= self.prob:
            return None
        extra = Fraction(ctx.rng.randint(1, self.max_extra * self._GRID), self._GRID)
        return sent + extra * ctx.delta


class HoldAcksUntilGst(DelayRule):
    """Every correct ack sent before GST lands exactly at GST."""

    def maybe_delay(self, ctx, msg_id, src, dst, msg, sent, planned):
        if sent < ctx.gst and isinstance(msg, (Ack, Sig)):
            return ctx.gst
        return None


class HoldRule(DelayRule):
    """Messages from srcs to dsts sent before `until` all land exactly then.

    Directional; add the mirror-image rule for symmetric partitions. The
    schedule author owes legality: a hold past GST between two correct
    processes is rejected by the simulator at scheduling time.
    """

    def __init__(self, srcs: Iterable[ProcessId], dsts: Iterable[ProcessId], until: Time) -> None:
        self.srcs = frozenset(srcs)
        self.dsts = frozenset(dsts)
        self.until = Fraction(until)

    def maybe_delay(self, ctx, msg_id, src, dst, msg, sent, planned):
        if src in self.srcs and dst in self.dsts and sent < self.until:
            return self.until
        return None


class Composite(Adversary):
    def __init__(self, scripts: Dict[ProcessId, Script], delay_rules: Optional[List[DelayRule]] = None) -> None:
        self.scripts = scripts
        self.delay_rules = delay_rules or []

    def start(self, ctx) -> None:
        if set(self.scripts) != set(ctx.byz_ids):
            raise ValueError(f"scripts cover {sorted(self.scripts)} but Byzantine set is {sorted(ctx.byz_ids)}")
        for pid in sorted(self.scripts):
            self.scripts[pid].start(ctx, pid)

    def on_deliver(self, ctx, byz_id, msg_id, src, msg) -> None:
        self.scripts[byz_id].on_deliver(ctx, byz_id, msg_id, src, msg)

    def on_send(self, ctx, msg_id, src, dst, msg, sent, planned) -> None:
        for rule in self.delay_rules:
            until = rule.maybe_delay(ctx, msg_id, src, dst, msg, sent, planned)
            if until is not None:
                ctx.delay(msg_id, until)
                return
