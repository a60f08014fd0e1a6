"""Domain types shared by every module, plus the canonical byte encoding.

Process ids are 1-based ints, views are positive ints, values are opaque byte
strings compared by byte equality. Times are exact rationals (fractions.Fraction)
in the simulator's delta units so event ordering never suffers float drift.

The canonical encoding is the only bit-exact contract in the package: every
signable payload serializes as a tag byte followed by 4-byte big-endian
length-prefixed fields in declaration order, which makes the encoding injective.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple, Union

ProcessId = int
ViewNumber = int
Value = bytes
Signature = bytes
Time = Fraction


class Bottom:
    """The distinguished view-1 progress certificate.

    An explicit singleton rather than an empty signature set so the view-1
    case stays distinguishable from a malformed certificate.
    """

    __slots__ = ()
    _instance: Optional["Bottom"] = None

    def __new__(cls) -> "Bottom":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BOTTOM"


BOTTOM = Bottom()


@dataclass(slots=True)
class ProgressCertificate:
    """f+1 cert-ack signatures proving a value is safe in a view."""

    value: Value
    view: ViewNumber
    sigs: Tuple[Tuple[ProcessId, Signature], ...]


@dataclass(slots=True)
class CommitCertificate:
    """ceil((n+f+1)/2) ack signatures for one (value, view)."""

    value: Value
    view: ViewNumber
    sigs: Tuple[Tuple[ProcessId, Signature], ...]


@dataclass(slots=True)
class Adopted:
    """The latest proposal a process acknowledged: the pair plus its proofs."""

    value: Value
    view: ViewNumber
    progress_cert: Union[ProgressCertificate, Bottom]
    leader_sig: Signature


@dataclass(slots=True)
class Vote:
    """A process's view-change report.

    Two independent halves: the adopted proposal (None when the process never
    acknowledged one, the nil vote) and, in generalized mode, the latest commit
    certificate the process has collected. They are independent because sig
    messages are broadcast, so a process can assemble a commit certificate
    without ever having received the propose it certifies.
    """

    adopted: Optional[Adopted]
    commit_cert: Optional[CommitCertificate] = None


NIL_VOTE = Vote(None, None)


# Protocol messages, a tagged union as one small class per tag.


@dataclass(slots=True)
class Propose:
    value: Value
    view: ViewNumber
    progress_cert: Union[ProgressCertificate, Bottom]
    leader_sig: Signature


@dataclass(slots=True)
class Ack:
    value: Value
    view: ViewNumber


@dataclass(slots=True)
class Sig:
    """Generalized mode: the signed counterpart of an Ack."""

    value: Value
    view: ViewNumber
    ack_sig: Signature


@dataclass(slots=True)
class VoteMsg:
    vote: Vote
    view: ViewNumber
    vote_sig: Signature


@dataclass(slots=True)
class CertRequest:
    value: Value
    view: ViewNumber
    votes: Tuple[Tuple[ProcessId, Vote, Signature], ...]


@dataclass(slots=True)
class CertAck:
    value: Value
    view: ViewNumber
    certack_sig: Signature


@dataclass(slots=True)
class Commit:
    value: Value
    view: ViewNumber
    cc: CommitCertificate


@dataclass(slots=True)
class NewView:
    view: ViewNumber


Message = Union[Propose, Ack, Sig, VoteMsg, CertRequest, CertAck, Commit, NewView]


# Trace events.

SEND = "send"
DELIVER = "deliver"
DECIDE = "decide"
ENTER_VIEW = "enter_view"
CRASH = "crash"


@dataclass(slots=True)
class TraceEvent:
    """One totally ordered execution step.

    Field use by kind:
      send:       msg_id, peer (receiver), msg
      deliver:    msg_id, peer (sender), msg, note (drop annotation or None)
      decide:     value, view
      enter_view: view
      crash:      no extra fields
    """

    time: Time
    kind: str
    actor: ProcessId
    msg_id: Optional[int] = None
    peer: Optional[ProcessId] = None
    msg: Optional[Message] = None
    note: Optional[str] = None
    value: Optional[Value] = None
    view: Optional[ViewNumber] = None


# Canonical encoding.
#
# Layout: one tag byte, then each field as 4-byte big-endian length + bytes.
# Nested shapes (votes, certificates) use their own tag bytes inside a single
# length-prefixed field. Views and process ids encode as 8-byte big-endian.

TAG_PROPOSE = b"\x01"
TAG_VOTE = b"\x02"
TAG_CERTACK = b"\x03"
TAG_ACK = b"\x04"

_TAG_ADOPTED_NIL = b"\x10"
_TAG_ADOPTED = b"\x11"
_TAG_CERT_BOTTOM = b"\x20"
_TAG_CERT = b"\x21"
_TAG_CC = b"\x22"
_TAG_CC_NONE = b"\x23"

_LABELS = {"propose": TAG_PROPOSE, "vote": TAG_VOTE, "certack": TAG_CERTACK, "ack": TAG_ACK}


def _lp(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def _enc_int(value: int) -> bytes:
    return value.to_bytes(8, "big")


def _enc_cert(cert: Union[ProgressCertificate, Bottom]) -> bytes:
    if cert is BOTTOM:
        return _TAG_CERT_BOTTOM
    parts = [_TAG_CERT, _lp(cert.value), _lp(_enc_int(cert.view))]
    for pid, sig in sorted(cert.sigs):
        parts.append(_lp(_enc_int(pid)) + _lp(sig))
    return b"".join(parts)


def _enc_cc(cc: Optional[CommitCertificate]) -> bytes:
    if cc is None:
        return _TAG_CC_NONE
    parts = [_TAG_CC, _lp(cc.value), _lp(_enc_int(cc.view))]
    for pid, sig in sorted(cc.sigs):
        parts.append(_lp(_enc_int(pid)) + _lp(sig))
    return b"".join(parts)


def _enc_vote(vote: Vote) -> bytes:
    if vote.adopted is None:
        head = _TAG_ADOPTED_NIL
    else:
        a = vote.adopted
        head = _TAG_ADOPTED + _lp(a.value) + _lp(_enc_int(a.view)) + _lp(_enc_cert(a.progress_cert)) + _lp(a.leader_sig)
    return head + _lp(_enc_cc(vote.commit_cert))


def canonical_encode(payload: tuple) -> bytes:
    """Encode one of the four signable tuples to deterministic bytes.

    Accepted shapes: ("propose", value, view), ("vote", Vote, view),
    ("certack", value, view), ("ack", value, view).
    """
    label, body, view = payload
    tag = _LABELS[label]
    if label == "vote":
        return tag + _lp(_enc_vote(body)) + _lp(_enc_int(view))
    return tag + _lp(body) + _lp(_enc_int(view))


def propose_payload(value: Value, view: ViewNumber) -> bytes:
    return canonical_encode(("propose", value, view))


def ack_payload(value: Value, view: ViewNumber) -> bytes:
    return canonical_encode(("ack", value, view))


def certack_payload(value: Value, view: ViewNumber) -> bytes:
    return canonical_encode(("certack", value, view))


def vote_payload(vote: Vote, view: ViewNumber) -> bytes:
    return canonical_encode(("vote", vote, view))


def leader_of(cfg, view: ViewNumber) -> ProcessId:
    """leader(v) is process (v mod n) + 1."""
    return (view % cfg.n) + 1


# Certificate and vote verification. These live here because votes are a core
# type and every module that touches one needs the same validity notion.


def verify_progress_certificate(cfg, directory, value: Value, view: ViewNumber, cert) -> bool:
    """True iff cert is BOTTOM at view 1, or exactly f+1 distinct valid signatures."""
    if cert is BOTTOM:
        return view == 1
    if not isinstance(cert, ProgressCertificate):
        return False
    if cert.value != value or cert.view != view:
        return False
    if len(cert.sigs) != cfg.f + 1:
        return False
    signers = set()
    payload = certack_payload(value, view)
    for pid, sig in cert.sigs:
        if pid in signers or not directory.verify(pid, payload, sig):
            return False
        signers.add(pid)
    return True


def verify_commit_certificate(cfg, directory, cc) -> bool:
    if not isinstance(cc, CommitCertificate):
        return False
    threshold = -(-(cfg.n + cfg.f + 1) // 2)
    if len(cc.sigs) < threshold:
        return False
    signers = set()
    payload = ack_payload(cc.value, cc.view)
    for pid, sig in cc.sigs:
        if pid in signers or not directory.verify(pid, payload, sig):
            return False
        signers.add(pid)
    return True


def vote_is_valid(vote: Vote, directory) -> bool:
    """Nil is valid; present halves must verify. Malformed input returns False.

    The directory carries the config, so thresholds and the leader map come
    from it. A commit certificate on a vote is invalid outside generalized mode.
    """
    if not isinstance(vote, Vote):
        return False
    cfg = directory.cfg
    a = vote.adopted
    if a is not None:
        if not isinstance(a, Adopted) or a.view < 1:
            return False
        if a.view > 1 and a.progress_cert is BOTTOM:
            return False
        if not verify_progress_certificate(cfg, directory, a.value, a.view, a.progress_cert):
            return False
        leader = leader_of(cfg, a.view)
        if not directory.verify(leader, propose_payload(a.value, a.view), a.leader_sig):
            return False
    if vote.commit_cert is not None:
        if cfg.mode != "generalized":
            return False
        if not verify_commit_certificate(cfg, directory, vote.commit_cert):
            return False
    return True


# Trace-line serialization helpers (hex for byte fields, plain JSON objects).


def _hx(b: bytes) -> str:
    return b.hex()


def _sigs_obj(sigs) -> List[list]:
    return [[pid, _hx(sig)] for pid, sig in sigs]


def cert_to_obj(cert) -> Optional[dict]:
    if cert is BOTTOM:
        return {"bottom": True}
    return {"value": _hx(cert.value), "view": cert.view, "sigs": _sigs_obj(cert.sigs)}


def cc_to_obj(cc: Optional[CommitCertificate]) -> Optional[dict]:
    if cc is None:
        return None
    return {"value": _hx(cc.value), "view": cc.view, "sigs": _sigs_obj(cc.sigs)}


def vote_to_obj(vote: Vote) -> dict:
    if vote.adopted is None:
        adopted = None
    else:
        a = vote.adopted
        adopted = {
            "value": _hx(a.value),
            "view": a.view,
            "cert": cert_to_obj(a.progress_cert),
            "sig": _hx(a.leader_sig),
        }
    return {"adopted": adopted, "cc": cc_to_obj(vote.commit_cert)}


def msg_to_obj(msg: Message) -> dict:
    if isinstance(msg, Propose):
        return {
            "kind": "propose",
            "value": _hx(msg.value),
            "view": msg.view,
            "cert": cert_to_obj(msg.progress_cert),
            "sig": _hx(msg.leader_sig),
        }
    if isinstance(msg, Ack):
        return {"kind": "ack", "value": _hx(msg.value), "view": msg.view}
    if isinstance(msg, Sig):
        return {"kind": "sig", "value": _hx(msg.value), "view": msg.view, "sig": _hx(msg.ack_sig)}
    if isinstance(msg, VoteMsg):
        return {"kind": "vote", "vote": vote_to_obj(msg.vote), "view": msg.view, "sig": _hx(msg.vote_sig)}
    if isinstance(msg, CertRequest):
        return {
            "kind": "cert_request",
            "value": _hx(msg.value),
            "view": msg.view,
            "votes": [[pid, vote_to_obj(v), _hx(sig)] for pid, v, sig in msg.votes],
        }
    if isinstance(msg, CertAck):
        return {"kind": "cert_ack", "value": _hx(msg.value), "view": msg.view, "sig": _hx(msg.certack_sig)}
    if isinstance(msg, Commit):
        return {"kind": "commit", "value": _hx(msg.value), "view": msg.view, "cc": cc_to_obj(msg.cc)}
    if isinstance(msg, NewView):
        return {"kind": "new_view", "view": msg.view}
    raise TypeError(f"unknown message {msg!r}")


def _sigs_from_obj(obj) -> Tuple[Tuple[ProcessId, Signature], ...]:
    return tuple((pid, bytes.fromhex(h)) for pid, h in obj)


def cert_from_obj(obj):
    if obj is None:
        return None
    if obj.get("bottom"):
        return BOTTOM
    return ProgressCertificate(bytes.fromhex(obj["value"]), obj["view"], _sigs_from_obj(obj["sigs"]))


def cc_from_obj(obj) -> Optional[CommitCertificate]:
    if obj is None:
        return None
    return CommitCertificate(bytes.fromhex(obj["value"]), obj["view"], _sigs_from_obj(obj["sigs"]))


def vote_from_obj(obj) -> Vote:
    a = obj["adopted"]
    adopted = None
    if a is not None:
        adopted = Adopted(bytes.fromhex(a["value"]), a["view"], cert_from_obj(a["cert"]), bytes.fromhex(a["sig"]))
    return Vote(adopted, cc_from_obj(obj["cc"]))


def msg_from_obj(obj: dict) -> Message:
    kind = obj["kind"]
    if kind == "propose":
        return Propose(bytes.fromhex(obj["value"]), obj["view"], cert_from_obj(obj["cert"]), bytes.fromhex(obj["sig"]))
    if kind == "ack":
        return Ack(bytes.fromhex(obj["value"]), obj["view"])
    if kind == "sig":
        return Sig(bytes.fromhex(obj["value"]), obj["view"], bytes.fromhex(obj["sig"]))
    if kind == "vote":
        return VoteMsg(vote_from_obj(obj["vote"]), obj["view"], bytes.fromhex(obj["sig"]))
    if kind == "cert_request":
        votes = tuple((pid, vote_from_obj(v), bytes.fromhex(sig)) for pid, v, sig in obj["votes"])
        return CertRequest(bytes.fromhex(obj["value"]), obj["view"], votes)
    if kind == "cert_ack":
        return CertAck(bytes.fromhex(obj["value"]), obj["view"], bytes.fromhex(obj["sig"]))
    if kind == "commit":
        return Commit(bytes.fromhex(obj["value"]), obj["view"], cc_from_obj(obj["cc"]))
    if kind == "new_view":
        return NewView(obj["view"])
    raise ValueError(f"unknown message kind {kind!r}")
