"""Consensus property checks over finished traces.

Every check is a pure function of the trace: re-checking a stored trace
reproduces the verdicts, so the replay path and the live path cannot drift.
Verdicts carry a witness exactly when they fail. The full report bundles the
verdicts with decision latencies, the largest certificates seen, and the two
network audits, and renders to machine-readable key/value lines followed by
a human summary in trailing comments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

from .core import (
    BOTTOM,
    DECIDE,
    CertAck,
    CertRequest,
    Commit,
    CommitCertificate,
    Message,
    ProcessId,
    ProgressCertificate,
    Propose,
    Sig,
    Time,
    Value,
    VoteMsg,
)
from .quorums import QuorumConfig, cert_ack_threshold, commit_cert_threshold, vote_quorum
from .simnet import Trace, audit_delivery_bounds, audit_reliability, cfg_from_meta

WEAK = "weak"
EXTENDED = "extended"

# Dispatchable check names, mirrored by the scenario grammar. Kept as a local
# literal so trace analysis never imports the scenario machinery; a test pins
# the two tuples equal.
KNOWN_CHECKS = (
    "agreement",
    "weak_validity",
    "extended_validity",
    "termination",
    "two_step",
    "certificates",
)


@dataclass(frozen=True)
class Verdict:
    """One named pass/fail with diagnostics; witness is present iff fail."""

    name: str
    passed: bool
    detail: str = ""
    witness: Optional[Tuple] = None

    def __post_init__(self) -> None:
        assert (self.witness is None) == self.passed, "witness present iff fail"


@dataclass
class CheckReport:
    verdicts: List[Verdict]
    decide_times: Dict[ProcessId, Fraction] = field(default_factory=dict)
    decide_views: Dict[ProcessId, int] = field(default_factory=dict)
    decide_values: Dict[ProcessId, Value] = field(default_factory=dict)
    delta_units: Dict[ProcessId, Fraction] = field(default_factory=dict)
    # Hop counts only make sense when every delay is exactly delta.
    hops: Optional[Dict[ProcessId, Fraction]] = None
    max_progress_cert: int = 0
    max_commit_cert: int = 0
    audit_failures: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts) and not any(self.audit_failures.values())


def _decides(trace: Trace, byz: FrozenSet[ProcessId]) -> List:
    return [e for e in trace.events if e.kind == DECIDE and e.actor not in byz]


def _decide_witness(event) -> Tuple:
    return (str(event.time), event.actor, event.value.hex(), event.view)


def check_agreement(trace: Trace, byz: FrozenSet[ProcessId]) -> Verdict:
    """No two correct decisions carry different values."""

    first = None
    for event in _decides(trace, byz):
        if first is None:
            first = event
        elif event.value != first.value:
            return Verdict(
                "agreement",
                False,
                f"process {first.actor} decided {first.value!r}, process {event.actor} decided {event.value!r}",
                (_decide_witness(first), _decide_witness(event)),
            )
    return Verdict("agreement", True, "all correct decisions equal")


def check_validity(
    trace: Trace,
    inputs: Dict[ProcessId, Value],
    byz: FrozenSet[ProcessId],
    flavor: str,
) -> Verdict:
    """Weak: fault-free uniform input must be the decision. Extended: any
    fault-free decision must be some process's input. Both are vacuous when
    Byzantine processes exist, which is what the definitions condition on."""

    name = f"{flavor}_validity"
    correct_inputs = {pid: v for pid, v in inputs.items() if pid not in byz}
    if byz:
        return Verdict(name, True, "vacuous: Byzantine processes present")
    if flavor == WEAK:
        uniform = set(correct_inputs.values())
        if len(uniform) != 1:
            return Verdict(name, True, "vacuous: inputs not uniform")
        (expected,) = uniform
        for event in _decides(trace, byz):
            if event.value != expected:
                return Verdict(
                    name,
                    False,
                    f"uniform input {expected!r} but process {event.actor} decided {event.value!r}",
                    (_decide_witness(event),),
                )
        return Verdict(name, True, "decisions equal the uniform input")
    if flavor != EXTENDED:
        raise ValueError(f"unknown validity flavor {flavor!r}")
    allowed = set(correct_inputs.values())
    for event in _decides(trace, byz):
        if event.value not in allowed:
            return Verdict(
                name,
                False,
                f"process {event.actor} decided {event.value!r}, proposed by nobody",
                (_decide_witness(event),),
            )
    return Verdict(name, True, "every decision was somebody's input")


def check_termination(trace: Trace, n: int, byz: FrozenSet[ProcessId]) -> Verdict:
    decided = {e.actor for e in _decides(trace, byz)}
    missing = sorted(set(range(1, n + 1)) - byz - decided)
    if missing:
        return Verdict(
            "termination",
            False,
            f"correct processes never decided: {missing}",
            tuple(missing),
        )
    return Verdict("termination", True, "every correct process decided")


def check_two_step(trace: Trace, delta: Time, byz: FrozenSet[ProcessId]) -> Verdict:
    """Every correct decision lands within two message delays of the start."""

    bound = 2 * Fraction(delta)
    late = [e for e in _decides(trace, byz) if e.time > bound]
    if late:
        worst = max(late, key=lambda e: e.time)
        return Verdict(
            "two_step",
            False,
            f"{len(late)} decisions after {bound}; latest at {worst.time} (process {worst.actor})",
            tuple(_decide_witness(e) for e in late),
        )
    return Verdict("two_step", True, f"all decisions at or before {bound}")


# Certificate sizing. Walks every certificate embedded anywhere in a message.


def _certificates(msg: Message) -> Iterator[Tuple[str, Union[ProgressCertificate, CommitCertificate]]]:
    def from_vote(vote, where: str):
        if vote.adopted is not None and vote.adopted.progress_cert is not BOTTOM:
            yield f"{where}.adopted", vote.adopted.progress_cert
        if vote.commit_cert is not None:
            yield f"{where}.cc", vote.commit_cert

    if isinstance(msg, Propose) and msg.progress_cert is not BOTTOM:
        yield "propose", msg.progress_cert
    elif isinstance(msg, VoteMsg):
        yield from from_vote(msg.vote, "vote")
    elif isinstance(msg, CertRequest):
        for pid, vote, _sig in msg.votes:
            yield from from_vote(vote, f"cert_request[{pid}]")
    elif isinstance(msg, Commit):
        yield "commit", msg.cc


def message_signature_count(msg: Message) -> int:
    """Total signatures a message carries, certificates included."""

    base = 0
    if isinstance(msg, Propose):
        base = 1
    elif isinstance(msg, VoteMsg):
        base = 1 + (1 if msg.vote.adopted is not None else 0)
    elif isinstance(msg, CertRequest):
        base = sum(1 + (1 if vote.adopted is not None else 0) for _pid, vote, _sig in msg.votes)
    elif isinstance(msg, (Sig, CertAck)):
        base = 1
    return base + sum(len(cert.sigs) for _where, cert in _certificates(msg))


def _type_signature_bound(msg: Message, cfg: QuorumConfig) -> int:
    """Largest signature count a well-formed message of this type can carry.

    The bounds are functions of n and f alone, never of the view number;
    that is the property the view-churn run leans on.
    """

    pc = cert_ack_threshold(cfg)
    cc = commit_cert_threshold(cfg) if cfg.mode == "generalized" else 0
    per_vote = 1 + 1 + pc + cc
    if isinstance(msg, Propose):
        return 1 + pc
    if isinstance(msg, (Sig, CertAck)):
        return 1
    if isinstance(msg, VoteMsg):
        return per_vote
    if isinstance(msg, CertRequest):
        return vote_quorum(cfg) * per_vote
    if isinstance(msg, Commit):
        return cc
    return 0  # Ack, NewView


def check_certificate_bound(trace: Trace, cfg: QuorumConfig) -> Verdict:
    """Progress certificates carry exactly f+1 signatures, commit
    certificates exactly ceil((n+f+1)/2), vote batches at most n-f entries,
    and no message exceeds its type's total, in every view reached."""

    pc_size = cert_ack_threshold(cfg)
    cc_size = commit_cert_threshold(cfg) if cfg.mode == "generalized" else None
    seen_pc = 0
    seen_cc = 0
    for event in trace.events:
        if event.msg is None:
            continue
        msg = event.msg
        for where, cert in _certificates(msg):
            count = len(cert.sigs)
            if isinstance(cert, ProgressCertificate):
                seen_pc = max(seen_pc, count)
                if count != pc_size:
                    return Verdict(
                        "certificates",
                        False,
                        f"progress certificate with {count} signatures (want exactly {pc_size}) in {where} at view {cert.view}",
                        (str(event.time), event.actor, where, count),
                    )
            else:
                seen_cc = max(seen_cc, count)
                if cc_size is None or count != cc_size:
                    return Verdict(
                        "certificates",
                        False,
                        f"commit certificate with {count} signatures (want exactly {cc_size}) in {where} at view {cert.view}",
                        (str(event.time), event.actor, where, count),
                    )
        if isinstance(msg, CertRequest) and len(msg.votes) > vote_quorum(cfg):
            return Verdict(
                "certificates",
                False,
                f"cert request with {len(msg.votes)} votes exceeds n-f = {vote_quorum(cfg)}",
                (str(event.time), event.actor, "cert_request", len(msg.votes)),
            )
        total = message_signature_count(msg)
        bound = _type_signature_bound(msg, cfg)
        if total > bound:
            return Verdict(
                "certificates",
                False,
                f"{msg.__class__.__name__} carries {total} signatures, type bound is {bound}",
                (str(event.time), event.actor, msg.__class__.__name__, total),
            )
    return Verdict(
        "certificates",
        True,
        f"max progress certificate {seen_pc}, max commit certificate {seen_cc}",
    )


def max_certificate_sizes(trace: Trace) -> Tuple[int, int]:
    biggest_pc = 0
    biggest_cc = 0
    for event in trace.events:
        if event.msg is None:
            continue
        for _where, cert in _certificates(event.msg):
            if isinstance(cert, ProgressCertificate):
                biggest_pc = max(biggest_pc, len(cert.sigs))
            else:
                biggest_cc = max(biggest_cc, len(cert.sigs))
    return biggest_pc, biggest_cc


# The full report.


def run_checks(trace: Trace, checks: Sequence[str]) -> CheckReport:
    """Dispatch the named checks against a trace, using only its metadata."""

    meta = trace.meta
    cfg = cfg_from_meta(meta)
    byz = frozenset(meta["byz"])
    delta = Fraction(meta["delta"])
    inputs = {int(p): bytes.fromhex(v) for p, v in meta["inputs"].items()}

    verdicts: List[Verdict] = []
    for name in checks:
        if name == "agreement":
            verdicts.append(check_agreement(trace, byz))
        elif name == "weak_validity":
            verdicts.append(check_validity(trace, inputs, byz, WEAK))
        elif name == "extended_validity":
            verdicts.append(check_validity(trace, inputs, byz, EXTENDED))
        elif name == "termination":
            verdicts.append(check_termination(trace, cfg.n, byz))
        elif name == "two_step":
            verdicts.append(check_two_step(trace, delta, byz))
        elif name == "certificates":
            verdicts.append(check_certificate_bound(trace, cfg))
        else:
            raise ValueError(f"unknown check {name!r}")

    report = CheckReport(verdicts=verdicts)
    for event in _decides(trace, byz):
        report.decide_times[event.actor] = Fraction(event.time)
        report.decide_views[event.actor] = event.view
        report.decide_values[event.actor] = event.value
        report.delta_units[event.actor] = Fraction(event.time) / delta
    if meta["latency"]["kind"] == "fixed":
        report.hops = dict(report.delta_units)
    report.max_progress_cert, report.max_commit_cert = max_certificate_sizes(trace)
    report.audit_failures = {
        "delivery_bounds": audit_delivery_bounds(trace),
        "reliability": audit_reliability(trace),
    }
    return report


def _value_token(value: Value) -> str:
    token = value.decode("utf-8", errors="replace")
    if token and token.isprintable() and " " not in token and not token.startswith("0x"):
        return token
    return "0x" + value.hex()


def format_report(report: CheckReport) -> str:
    """Key/value records, then the human summary as trailing comments."""

    lines = [f"result = {'pass' if report.passed else 'fail'}"]
    for verdict in report.verdicts:
        lines.append(f"check {verdict.name} = {'pass' if verdict.passed else 'fail'}")
        if not verdict.passed:
            lines.append(f"witness {verdict.name} = {json.dumps(verdict.witness)}")
    for pid in sorted(report.decide_times):
        value = _value_token(report.decide_values[pid])
        lines.append(
            f"decide {pid} = {value} view {report.decide_views[pid]} time {report.decide_times[pid]}"
        )
        lines.append(f"latency_delta {pid} = {report.delta_units[pid]}")
        if report.hops is not None:
            lines.append(f"latency_hops {pid} = {report.hops[pid]}")
    lines.append(f"max_progress_cert = {report.max_progress_cert}")
    lines.append(f"max_commit_cert = {report.max_commit_cert}")
    for name, failures in sorted(report.audit_failures.items()):
        lines.append(f"audit {name} = {'ok' if not failures else f'{len(failures)} violations'}")
        for failure in failures[:20]:
            lines.append(f"audit_detail {name} = {failure}")

    lines.append("")
    failed = [v.name for v in report.verdicts if not v.passed]
    if not report.decide_times:
        lines.append("# no correct process decided")
    else:
        times = sorted(set(report.decide_times.values()))
        span = str(times[0]) if len(times) == 1 else f"{times[0]}..{times[-1]}"
        values = sorted({_value_token(v) for v in report.decide_values.values()})
        lines.append(
            f"# {len(report.decide_times)} correct processes decided {', '.join(values)} at time {span}"
        )
    if failed:
        lines.append(f"# FAILED checks: {', '.join(failed)}")
        for verdict in report.verdicts:
            if not verdict.passed:
                lines.append(f"#   {verdict.name}: {verdict.detail}")
    else:
        lines.append(f"# all {len(report.verdicts)} checks passed")
    bad_audits = {name for name, fails in report.audit_failures.items() if fails}
    if bad_audits:
        lines.append(f"# FAILED audits: {', '.join(sorted(bad_audits))}")
    return "\n".join(lines) + "\n"
