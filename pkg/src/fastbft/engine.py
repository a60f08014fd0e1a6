"""The per-process consensus state machine.

Strictly event-in, messages-out: the engine never touches a clock or a socket.
The node runtime feeds it deliveries and view entries and ships whatever it
emits. One instance per process per run.

Fast path: the leader of view v proposes, everyone acknowledges to everyone,
and a process decides on fast_decide_quorum matching acks. In generalized mode
each ack travels with a signed sibling (Sig); commit_cert_threshold of those
signatures form a commit certificate, which is broadcast in a Commit message,
and commit_cert_threshold distinct valid Commit senders decide a process on
the slow path.

View change: on entering view v every process reports its vote to leader(v).
The leader collects vote_quorum valid votes, runs the selection rule, and asks
everyone to confirm the selected value; cert_ack_threshold signed confirmations
form the progress certificate that makes its proposal credible. Followers
re-run the same selection rule on the enclosed votes before confirming, with
the claimed value standing in for their own input, so free-choice outcomes
verify naturally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from .core import (
    Ack,
    Adopted,
    CertAck,
    CertRequest,
    Commit,
    CommitCertificate,
    Message,
    ProcessId,
    ProgressCertificate,
    Propose,
    Sig,
    Value,
    ViewNumber,
    Vote,
    VoteMsg,
    ack_payload,
    certack_payload,
    leader_of,
    propose_payload,
    verify_commit_certificate,
    verify_progress_certificate,
    vote_is_valid,
    vote_payload,
)
from .core import BOTTOM
from .quorums import (
    GENERALIZED,
    QuorumConfig,
    cert_ack_threshold,
    commit_cert_threshold,
    equivocation_vote_threshold,
    fast_decide_quorum,
    vote_quorum,
)

# Phases.
FOLLOWER = "follower"
LEADER_COLLECTING_VOTES = "leader_collecting_votes"
LEADER_AWAITING_CERT_ACKS = "leader_awaiting_cert_acks"
LEADER_PROPOSED = "leader_proposed"

# Selection bases.
ALL_NIL = "all_nil"
UNIQUE_AT_HIGHEST_VIEW = "unique_at_highest_view"
EQUIVOCATION_QUORUM = "equivocation_quorum"
COMMIT_CERTIFICATE = "commit_certificate"
EQUIVOCATION_FREE_CHOICE = "equivocation_free_choice"


@dataclass(slots=True)
class Selected:
    value: Value
    basis: str


@dataclass(slots=True)
class NeedVoteExcluding:
    q: ProcessId
    w: ViewNumber


@dataclass(slots=True)
class RestartRequired:
    pass


SelectionOutcome = object


class PreconditionViolation(Exception):
    pass


def run_selection(
    cfg: QuorumConfig,
    own_input: Value,
    votes: Dict[ProcessId, Vote],
    prior_w: Optional[ViewNumber] = None,
) -> SelectionOutcome:
    """The view-change selection rule over a set of valid votes.

    All nil: nothing can have been decided, pick own_input. Otherwise look at
    the highest adopted view w. A single value there is the only candidate.
    Two values at w prove leader(w) equivocated, so the decision falls to the
    votes of everyone else (votes'): a commit certificate for view w wins
    (generalized mode), then a quorum of equivocation_vote_threshold votes for
    one value at w (ties broken toward the lexicographically smallest value),
    and failing both, any value is safe and own_input is picked.

    prior_w is the w of the run that previously demanded exclusion; a higher
    w now means the exclusion round was overtaken and selection must restart.
    """
    if len(votes) < vote_quorum(cfg):
        raise PreconditionViolation(f"need {vote_quorum(cfg)} votes, have {len(votes)}")
    non_nil = {p: v for p, v in votes.items() if v.adopted is not None}
    if not non_nil:
        return Selected(own_input, ALL_NIL)
    w = max(v.adopted.view for v in non_nil.values())
    top_values = {v.adopted.value for v in non_nil.values() if v.adopted.view == w}
    if len(top_values) == 1:
        return Selected(next(iter(top_values)), UNIQUE_AT_HIGHEST_VIEW)

    q = leader_of(cfg, w)
    non_q = {p: v for p, v in votes.items() if p != q}
    if len(non_q) < vote_quorum(cfg):
        return NeedVoteExcluding(q, w)
    if prior_w is not None and w > prior_w:
        return RestartRequired()

    if cfg.mode == GENERALIZED:
        for v in non_q.values():
            cc = v.commit_cert
            if cc is not None and cc.view == w:
                return Selected(cc.value, COMMIT_CERTIFICATE)

    counts: Dict[Value, int] = {}
    for v in non_q.values():
        a = v.adopted
        if a is not None and a.view == w:
            counts[a.value] = counts.get(a.value, 0) + 1
    threshold = equivocation_vote_threshold(cfg)
    quorate = [value for value, cnt in counts.items() if cnt >= threshold]
    if quorate:
        return Selected(min(quorate), EQUIVOCATION_QUORUM)
    return Selected(own_input, EQUIVOCATION_FREE_CHOICE)


Emission = Tuple[Optional[ProcessId], Message]  # dest None = broadcast to all


class Engine:
    """Consensus state for one process. See the module docstring for the flow."""

    def __init__(self, pid: ProcessId, cfg: QuorumConfig, input_value: Value, directory) -> None:
        self.id = pid
        self.cfg = cfg
        self.input = input_value
        self.directory = directory
        self.current_view: ViewNumber = 1
        self.adopted: Optional[Adopted] = None
        self.best_cc: Optional[CommitCertificate] = None
        self.decided: Optional[Tuple[Value, ViewNumber]] = None
        self.phase = FOLLOWER
        self._reset_books()
        self._out: List[Emission] = []
        self._note: Optional[str] = None

    def _reset_books(self) -> None:
        self.acks: Dict[Value, Set[ProcessId]] = {}
        self.sig_book: Dict[Value, Dict[ProcessId, bytes]] = {}
        self.commit_senders: Dict[Value, Set[ProcessId]] = {}
        self.commit_sent = False
        self.seen_propose = False
        self.votes: Dict[ProcessId, Tuple[Vote, bytes]] = {}
        self.cert_acks: Dict[ProcessId, bytes] = {}
        self.selected: Optional[Value] = None
        self.prior_w: Optional[ViewNumber] = None

    # Emission helpers.

    def _send(self, dest: Optional[ProcessId], msg: Message) -> None:
        self._out.append((dest, msg))

    def _take(self) -> Tuple[List[Emission], Optional[str]]:
        out, note = self._out, self._note
        self._out, self._note = [], None
        return out, note

    def _drop(self, note: str) -> None:
        self._note = note

    # Entry points.

    def start(self) -> List[Emission]:
        """View-1 kickoff: the first leader proposes its input with no certificate."""
        if self.id == leader_of(self.cfg, 1):
            sig = self.directory.sign(self.id, propose_payload(self.input, 1))
            self.phase = LEADER_PROPOSED
            self._send(None, Propose(self.input, 1, BOTTOM, sig))
        return self._take()[0]

    def current_vote(self) -> Vote:
        cc = self.best_cc if self.cfg.mode == GENERALIZED else None
        return Vote(self.adopted, cc)

    def on_enter_view(self, view: ViewNumber) -> List[Emission]:
        """Move to a higher view, report the vote to its leader, reset the books."""
        if view <= self.current_view:
            return []
        self.current_view = view
        self._reset_books()
        self.phase = FOLLOWER
        vote = self.current_vote()
        sig = self.directory.sign(self.id, vote_payload(vote, view))
        leader = leader_of(self.cfg, view)
        if leader == self.id:
            self.phase = LEADER_COLLECTING_VOTES
            self.votes[self.id] = (vote, sig)
            self._try_select()
        else:
            self._send(leader, VoteMsg(vote, view, sig))
        return self._take()[0]

    def handle(self, msg: Message, sender: ProcessId) -> Tuple[List[Emission], Optional[str]]:
        if isinstance(msg, Ack):
            self._on_ack(msg, sender)
        elif isinstance(msg, Sig):
            self._on_sig(msg, sender)
        elif isinstance(msg, Propose):
            self._on_propose(msg, sender)
        elif isinstance(msg, Commit):
            self._on_commit(msg, sender)
        elif isinstance(msg, VoteMsg):
            self._on_vote(msg, sender)
        elif isinstance(msg, CertRequest):
            self._on_cert_request(msg, sender)
        elif isinstance(msg, CertAck):
            self._on_cert_ack(msg, sender)
        else:
            self._drop("unroutable")
        return self._take()

    # Fast path.

    def _on_propose(self, msg: Propose, sender: ProcessId) -> None:
        if msg.view != self.current_view:
            return self._drop("wrong_view")
        if sender != leader_of(self.cfg, msg.view):
            return self._drop("not_leader")
        if self.seen_propose:
            return self._drop("duplicate_propose")
        if not verify_progress_certificate(self.cfg, self.directory, msg.value, msg.view, msg.progress_cert):
            return self._drop("bad_certificate")
        if not self.directory.verify(sender, propose_payload(msg.value, msg.view), msg.leader_sig):
            return self._drop("bad_signature")
        self.seen_propose = True
        # Adopt before acknowledging; the ack promises the vote will report it.
        self.adopted = Adopted(msg.value, msg.view, msg.progress_cert, msg.leader_sig)
        self._send(None, Ack(msg.value, msg.view))
        if self.cfg.mode == GENERALIZED:
            ack_sig = self.directory.sign(self.id, ack_payload(msg.value, msg.view))
            self._send(None, Sig(msg.value, msg.view, ack_sig))

    def _on_ack(self, msg: Ack, sender: ProcessId) -> None:
        if msg.view != self.current_view:
            return self._drop("wrong_view")
        book = self.acks.setdefault(msg.value, set())
        book.add(sender)
        if len(book) >= fast_decide_quorum(self.cfg) and self.decided is None:
            self.decided = (msg.value, msg.view)

    # Slow path (generalized mode).

    def _on_sig(self, msg: Sig, sender: ProcessId) -> None:
        if self.cfg.mode != GENERALIZED:
            return self._drop("mode_mismatch")
        if msg.view != self.current_view:
            return self._drop("wrong_view")
        if not self.directory.verify(sender, ack_payload(msg.value, msg.view), msg.ack_sig):
            return self._drop("bad_signature")
        book = self.sig_book.setdefault(msg.value, {})
        book.setdefault(sender, msg.ack_sig)
        threshold = commit_cert_threshold(self.cfg)
        if len(book) >= threshold and not self.commit_sent:
            sigs = tuple(sorted(book.items())[:threshold])
            cc = CommitCertificate(msg.value, msg.view, sigs)
            self._update_best_cc(cc)
            self.commit_sent = True
            self._send(None, Commit(msg.value, msg.view, cc))

    def _on_commit(self, msg: Commit, sender: ProcessId) -> None:
        if self.cfg.mode != GENERALIZED:
            return self._drop("mode_mismatch")
        if msg.view != self.current_view:
            return self._drop("wrong_view")
        cc = msg.cc
        if cc.value != msg.value or cc.view != msg.view or not verify_commit_certificate(self.cfg, self.directory, cc):
            return self._drop("bad_commit_certificate")
        self._update_best_cc(cc)
        book = self.commit_senders.setdefault(msg.value, set())
        book.add(sender)
        if len(book) >= commit_cert_threshold(self.cfg) and self.decided is None:
            self.decided = (msg.value, msg.view)

    def _update_best_cc(self, cc: CommitCertificate) -> None:
        if self.best_cc is None or cc.view > self.best_cc.view:
            self.best_cc = cc

    # View change, leader side.

    def _on_vote(self, msg: VoteMsg, sender: ProcessId) -> None:
        if self.phase != LEADER_COLLECTING_VOTES:
            return self._drop("not_collecting")
        if msg.view != self.current_view:
            return self._drop("wrong_view")
        if sender in self.votes:
            return self._drop("duplicate_vote")
        if not vote_is_valid(msg.vote, self.directory):
            return self._drop("invalid_vote")
        if not self.directory.verify(sender, vote_payload(msg.vote, msg.view), msg.vote_sig):
            return self._drop("invalid_vote")
        self.votes[sender] = (msg.vote, msg.vote_sig)
        self._try_select()

    def _try_select(self) -> None:
        if len(self.votes) < vote_quorum(self.cfg):
            return
        votes = {p: v for p, (v, _) in self.votes.items()}
        while True:
            outcome = run_selection(self.cfg, self.input, votes, self.prior_w)
            if isinstance(outcome, NeedVoteExcluding):
                self.prior_w = outcome.w
                return
            if isinstance(outcome, RestartRequired):
                self.prior_w = None
                continue
            break
        assert isinstance(outcome, Selected)
        self.selected = outcome.value
        self.phase = LEADER_AWAITING_CERT_ACKS
        enclosed = tuple((p, v, s) for p, (v, s) in self.votes.items())
        self._send(None, CertRequest(outcome.value, self.current_view, enclosed))

    # View change, verifier side.

    def _on_cert_request(self, msg: CertRequest, sender: ProcessId) -> None:
        if msg.view != self.current_view:
            return self._drop("wrong_view")
        if sender != leader_of(self.cfg, msg.view):
            return self._drop("not_leader")
        enclosed: Dict[ProcessId, Vote] = {}
        for pid, vote, sig in msg.votes:
            if pid in enclosed:
                return self._drop("invalid_enclosed_vote")
            if not vote_is_valid(vote, self.directory):
                return self._drop("invalid_enclosed_vote")
            if not self.directory.verify(pid, vote_payload(vote, msg.view), sig):
                return self._drop("invalid_enclosed_vote")
            enclosed[pid] = vote
        try:
            # The claimed value stands in for the verifier's input so that
            # free-choice outcomes confirm exactly when any value is safe.
            outcome = run_selection(self.cfg, msg.value, enclosed)
        except PreconditionViolation:
            return self._drop("precondition_violation")
        if not isinstance(outcome, Selected) or outcome.value != msg.value:
            return self._drop("selection_mismatch")
        self._send(sender, CertAck(msg.value, msg.view, self.directory.sign(self.id, certack_payload(msg.value, msg.view))))

    def _on_cert_ack(self, msg: CertAck, sender: ProcessId) -> None:
        if self.phase != LEADER_AWAITING_CERT_ACKS:
            return self._drop("not_awaiting_cert_acks")
        if msg.view != self.current_view or msg.value != self.selected:
            return self._drop("wrong_view" if msg.view != self.current_view else "selection_mismatch")
        if not self.directory.verify(sender, certack_payload(msg.value, msg.view), msg.certack_sig):
            return self._drop("bad_signature")
        self.cert_acks.setdefault(sender, msg.certack_sig)
        threshold = cert_ack_threshold(self.cfg)
        if len(self.cert_acks) >= threshold:
            sigs = tuple(sorted(self.cert_acks.items())[:threshold])
            cert = ProgressCertificate(msg.value, msg.view, sigs)
            self.phase = LEADER_PROPOSED
            sig = self.directory.sign(self.id, propose_payload(msg.value, msg.view))
            self._send(None, Propose(msg.value, msg.view, cert, sig))
