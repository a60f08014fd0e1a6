"""Per-process runtime: one engine plus one view synchronizer, wired together.

The node owns message routing. NewView always goes to the synchronizer;
protocol messages for the current view go to the engine; messages one view
ahead are buffered and replayed in arrival order on entry (a lagging process
would otherwise drop the traffic that is trying to pull it forward); anything
else is dropped with a trace note. Entering a view discards buffers for views
that were skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .core import Message, NewView, ProcessId, Time, Value, ViewNumber
from .engine import Emission, Engine
from .quorums import QuorumConfig
from .view_sync import ViewSync

# Record kinds a node hands back to the simulator, beyond plain sends.
REC_DECIDE = "decide"
REC_ENTER_VIEW = "enter_view"


@dataclass(slots=True)
class NodeResult:
    sends: List[Emission] = field(default_factory=list)
    note: Optional[str] = None
    records: List[tuple] = field(default_factory=list)
    timer_at: Optional[Time] = None


class Node:
    def __init__(self, pid: ProcessId, cfg: QuorumConfig, input_value: Value, directory, base_timeout: Time) -> None:
        self.id = pid
        self.cfg = cfg
        self.engine = Engine(pid, cfg, input_value, directory)
        self.sync = ViewSync(pid, cfg, base_timeout)
        self.buffer: List[Tuple[ProcessId, Message]] = []
        self._decide_recorded = False

    @property
    def decided(self):
        return self.engine.decided

    def start(self) -> NodeResult:
        res = NodeResult(timer_at=self.sync.timeout)
        res.sends.extend(self.engine.start())
        self._check_decided(res)
        return res

    def handle_delivery(self, now: Time, src: ProcessId, msg: Message) -> NodeResult:
        res = NodeResult()
        if isinstance(msg, NewView):
            sends, enter = self.sync.on_new_view(msg, src)
            res.sends.extend(sends)
            if enter is not None:
                self._enter(enter, now, res)
            return res
        view = msg.view
        current = self.engine.current_view
        if view == current:
            sends, note = self.engine.handle(msg, src)
            res.sends.extend(sends)
            res.note = note
            self._check_decided(res)
        elif view == current + 1:
            self.buffer.append((src, msg))
            res.note = "buffered"
        elif view < current:
            res.note = "stale_view"
        else:
            res.note = "beyond_buffer"
        return res

    def on_timer(self, now: Time) -> NodeResult:
        sends, reschedule = self.sync.on_timer(now)
        return NodeResult(sends=sends, timer_at=reschedule)

    def _enter(self, view: ViewNumber, now: Time, res: NodeResult) -> None:
        self.sync.entered(view, now)
        res.records.append((REC_ENTER_VIEW, view))
        res.sends.extend(self.engine.on_enter_view(view))
        self._check_decided(res)
        pending, self.buffer = self.buffer, []
        for src, msg in pending:
            if msg.view != view:
                continue
            sends, _ = self.engine.handle(msg, src)
            res.sends.extend(sends)
            self._check_decided(res)

    def _check_decided(self, res: NodeResult) -> None:
        d = self.engine.decided
        if d is not None and not self._decide_recorded:
            self._decide_recorded = True
            res.records.append((REC_DECIDE, d[0], d[1]))
