"""Simulator determinism, delivery guarantees, and the audit pair."""

from fractions import Fraction

import pytest

from fastbft.adversary import Composite, HoldRule, SilentScript
from fastbft.core import DECIDE, DELIVER, SEND, TraceEvent, Ack
from fastbft.simnet import (
    Fixed,
    IllegalDelay,
    SimConfig,
    Simulation,
    Trace,
    UniformRandom,
    audit_delivery_bounds,
    audit_reliability,
    cfg_from_meta,
    parse_trace,
    trace_to_text,
)

A = b"0a"


def _inputs(cfg, leader_value=b"\x01"):
    return {pid: (leader_value if pid == 2 else b"\x00") for pid in range(1, cfg.n + 1)}


def _fault_free(cfg, seed=3, latency=None, gst=0, horizon=100):
    sim = SimConfig(delta=1, gst=gst, horizon=horizon, seed=seed, latency=latency or Fixed(1))
    return Simulation(cfg, sim, _inputs(cfg)).run()


def test_fault_free_two_step_decide(cfg4):
    result = _fault_free(cfg4)
    assert not result.horizon_exceeded
    assert set(result.decided) == {1, 2, 3, 4}
    assert set(result.decided.values()) == {(b"\x01", 1)}
    assert set(result.decide_times.values()) == {Fraction(2)}


def test_trace_is_byte_deterministic(cfg9):
    latency = UniformRandom(Fraction(1, 2), 1)
    first = trace_to_text(_fault_free(cfg9, seed=11, latency=latency).trace())
    second = trace_to_text(_fault_free(cfg9, seed=11, latency=latency).trace())
    assert first == second
    other = trace_to_text(_fault_free(cfg9, seed=12, latency=latency).trace())
    assert other != first


def test_trace_round_trips_through_text(cfg4):
    trace = _fault_free(cfg4).trace()
    text = trace_to_text(trace)
    back = parse_trace(text)
    assert back.meta == trace.meta
    assert len(back.events) == len(trace.events)
    assert trace_to_text(back) == text
    assert cfg_from_meta(back.meta) == cfg4


def test_parse_trace_rejects_malformed_input():
    with pytest.raises(ValueError):
        parse_trace("hello world\n")
    with pytest.raises(ValueError):
        parse_trace('# fastbft-trace v1 {"n":4}\nnot a line\n')


def test_event_times_are_non_decreasing(cfg4):
    events = _fault_free(cfg4).events
    times = [ev.time for ev in events]
    assert times == sorted(times)


def test_self_sends_deliver_instantly(cfg4):
    trace = _fault_free(cfg4).trace()
    sends = {ev.msg_id: ev for ev in trace.events if ev.kind == SEND}
    self_deliveries = [
        ev
        for ev in trace.events
        if ev.kind == DELIVER and sends[ev.msg_id].actor == ev.actor
    ]
    assert self_deliveries
    for ev in self_deliveries:
        assert ev.time == sends[ev.msg_id].time


def test_audits_clean_on_fault_free_runs(cfg4, cfg9):
    for cfg in (cfg4, cfg9):
        trace = _fault_free(cfg, latency=UniformRandom(Fraction(1, 2), 1)).trace()
        assert audit_delivery_bounds(trace) == []
        assert audit_reliability(trace) == []


def test_uniform_latency_respects_bounds(cfg4):
    trace = _fault_free(cfg4, latency=UniformRandom(Fraction(1, 2), 1)).trace()
    sends = {ev.msg_id: ev for ev in trace.events if ev.kind == SEND}
    cross = [
        (ev.time - sends[ev.msg_id].time)
        for ev in trace.events
        if ev.kind == DELIVER and sends[ev.msg_id].actor != ev.actor
    ]
    assert cross
    assert all(Fraction(1, 2) <= d <= 1 for d in cross)


def _synthetic_meta():
    return {
        "n": 4,
        "f": 1,
        "t": 1,
        "mode": "vanilla",
        "delta": "1",
        "gst": "0",
        "horizon": "10",
        "seed": 0,
        "latency": {"kind": "fixed", "d": "1"},
        "byz": [],
        "inputs": {str(p): "00" for p in range(1, 5)},
    }


def _send(time, src, dst, msg_id, msg=None):
    return TraceEvent(Fraction(time), SEND, src, msg_id=msg_id, peer=dst, msg=msg or Ack(b"", 1))


def _deliver(time, src, dst, msg_id, msg=None):
    return TraceEvent(Fraction(time), DELIVER, dst, msg_id=msg_id, peer=src, msg=msg or Ack(b"", 1))


def test_reliability_audit_catches_loss():
    trace = Trace(_synthetic_meta(), [_send(0, 1, 2, 1)])
    violations = audit_reliability(trace)
    assert len(violations) == 1 and "loss" in violations[0]
    assert audit_reliability(trace, allow_in_flight=True) == []


def test_reliability_audit_catches_creation_and_duplication():
    trace = Trace(_synthetic_meta(), [_deliver(1, 1, 2, 7)])
    assert any("creation" in v for v in audit_reliability(trace))
    trace = Trace(
        _synthetic_meta(),
        [_send(0, 1, 2, 1), _deliver(1, 1, 2, 1), _deliver(2, 1, 2, 1)],
    )
    assert any("duplication" in v for v in audit_reliability(trace))


def test_reliability_audit_catches_alteration():
    trace = Trace(
        _synthetic_meta(),
        [_send(0, 1, 2, 1, Ack(b"x", 1)), _deliver(1, 1, 2, 1, Ack(b"y", 1))],
    )
    assert any("altered" in v for v in audit_reliability(trace))


def test_delivery_bounds_audit_catches_late_post_gst_delivery():
    events = [_send(0, 1, 2, 1), _deliver(Fraction(5, 2), 1, 2, 1)]
    violations = audit_delivery_bounds(Trace(_synthetic_meta(), events))
    assert len(violations) == 1 and "delay 5/2" in violations[0]


def test_delivery_bounds_audit_ignores_byzantine_endpoints():
    meta = _synthetic_meta()
    meta["byz"] = [1]
    events = [_send(0, 1, 2, 1), _deliver(Fraction(5, 2), 1, 2, 1)]
    assert audit_delivery_bounds(Trace(meta, events)) == []


def test_delivery_bounds_audit_allows_arbitrary_pre_gst_delay():
    meta = _synthetic_meta()
    meta["gst"] = "50"
    events = [_send(0, 1, 2, 1), _deliver(40, 1, 2, 1)]
    assert audit_delivery_bounds(Trace(meta, events)) == []


def test_post_gst_hold_raises_illegal_delay(cfg4):
    sim = SimConfig(delta=1, gst=0, horizon=50, seed=1, latency=Fixed(1))
    adversary = Composite({}, [HoldRule(srcs=[2], dsts=[1], until=Fraction(20))])
    with pytest.raises(IllegalDelay):
        Simulation(cfg4, sim, _inputs(cfg4), adversary=adversary).run()


def test_silent_leader_with_short_horizon_exceeds(cfg4):
    sim = SimConfig(delta=1, gst=0, horizon=3, seed=1, latency=Fixed(1))
    adversary = Composite({2: SilentScript()})
    result = Simulation(
        cfg4, sim, _inputs(cfg4), adversary=adversary, byz_ids=frozenset({2})
    ).run()
    assert result.horizon_exceeded
    assert result.decided == {}
    assert all(ev.kind != DECIDE for ev in result.events)


def test_byz_ids_require_an_adversary(cfg4):
    sim = SimConfig(delta=1, gst=0, horizon=3, seed=1, latency=Fixed(1))
    with pytest.raises(ValueError):
        Simulation(cfg4, sim, _inputs(cfg4), byz_ids=frozenset({2}))
