"""Builders for well-signed protocol structures shared across test modules."""

from fastbft.core import (
    BOTTOM,
    Adopted,
    CommitCertificate,
    NIL_VOTE,
    ProgressCertificate,
    Vote,
    ack_payload,
    certack_payload,
    leader_of,
    propose_payload,
)
from fastbft.quorums import commit_cert_threshold


def progress_cert(cfg, directory, value, view, signers=None):
    signers = list(signers if signers is not None else range(1, cfg.f + 2))
    sigs = tuple((p, directory.sign(p, certack_payload(value, view))) for p in signers)
    return ProgressCertificate(value, view, sigs)


def commit_cert(cfg, directory, value, view, signers=None):
    if signers is None:
        signers = range(1, commit_cert_threshold(cfg) + 1)
    sigs = tuple((p, directory.sign(p, ack_payload(value, view))) for p in signers)
    return CommitCertificate(value, view, sigs)


def adopted(cfg, directory, value, view):
    cert = BOTTOM if view == 1 else progress_cert(cfg, directory, value, view)
    sig = directory.sign(leader_of(cfg, view), propose_payload(value, view))
    return Adopted(value, view, cert, sig)


def adopted_vote(cfg, directory, value, view, cc=None):
    return Vote(adopted(cfg, directory, value, view), cc)


def nil_vote():
    return NIL_VOTE
