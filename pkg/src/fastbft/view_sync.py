"""View synchronizer: doubling timeouts with echo amplification.

Each process waits out a timeout in its current view; when the timer lands it
announces NewView(v+1) to everyone (itself included) and doubles the timeout.
f+1 distinct announcers for a view make everyone echo it, so one correct
straggler set cannot be left behind by a Byzantine minority; n-f distinct
announcers let a process enter the view, skipping intermediate views freely.
Timeouts never shrink and never reset, which gives the arbitrary post-GST
message delays a timeout they eventually fit under.

Deciding does not silence a process: a straggler can only assemble an entry
quorum if the processes that already decided keep announcing, echoing, and
entering alongside it. The timer chain therefore never stops itself; the
simulation layer retires the timers once every correct process has decided.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple

from .core import NewView, ProcessId, Time, ViewNumber
from .engine import Emission
from .quorums import QuorumConfig


class ViewSync:
    def __init__(self, pid: ProcessId, cfg: QuorumConfig, base_timeout: Time) -> None:
        self.id = pid
        self.cfg = cfg
        self.current_view: ViewNumber = 1
        self.view_entry_time: Time = Fraction(0)
        self.timeout = base_timeout
        self.announcers: Dict[ViewNumber, Set[ProcessId]] = {}
        self.echoed: Set[ViewNumber] = set()

    def on_timer(self, now: Time) -> Tuple[List[Emission], Time]:
        """Returns (emissions, next timer time); the chain never stops itself."""
        if now - self.view_entry_time >= self.timeout:
            out: List[Emission] = [(None, NewView(self.current_view + 1))]
            self.timeout = self.timeout * 2
            return out, now + self.timeout
        return [], self.view_entry_time + self.timeout

    def on_new_view(self, msg: NewView, sender: ProcessId) -> Tuple[List[Emission], Optional[ViewNumber]]:
        """Returns (emissions, view to enter or None). The caller performs the entry."""
        v = msg.view
        if v <= self.current_view:
            return [], None
        book = self.announcers.setdefault(v, set())
        book.add(sender)
        out: List[Emission] = []
        if len(book) >= self.cfg.f + 1 and v not in self.echoed:
            self.echoed.add(v)
            out.append((None, NewView(v)))
        enter = None
        quorum = self.cfg.n - self.cfg.f
        eligible = [u for u, s in self.announcers.items() if u > self.current_view and len(s) >= quorum]
        if eligible:
            enter = max(eligible)
        return out, enter

    def entered(self, view: ViewNumber, now: Time) -> None:
        self.current_view = view
        self.view_entry_time = now
        for u in [u for u in self.announcers if u <= view]:
            del self.announcers[u]
