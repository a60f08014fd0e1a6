"""Node-level routing: buffering, view entry replay, decide records."""

from fractions import Fraction

from fastbft.core import Ack, NewView, Propose, BOTTOM, propose_payload
from fastbft.node import Node, REC_DECIDE, REC_ENTER_VIEW

A, B = b"A", b"B"


def _node(pid, cfg, directory, value=B):
    return Node(pid, cfg, value, directory, base_timeout=Fraction(5))


def _propose(directory, value, view, leader):
    return Propose(value, view, BOTTOM, directory.sign(leader, propose_payload(value, view)))


def test_start_sets_timer_and_leader_proposes(cfg4, dir4):
    leader = _node(2, cfg4, dir4, A)
    res = leader.start()
    assert res.timer_at == Fraction(5)
    assert len(res.sends) == 1 and isinstance(res.sends[0][1], Propose)

    follower = _node(1, cfg4, dir4)
    res = follower.start()
    assert res.timer_at == Fraction(5)
    assert res.sends == []


def test_current_view_messages_reach_engine(cfg4, dir4):
    follower = _node(1, cfg4, dir4)
    follower.start()
    res = follower.handle_delivery(Fraction(1), 2, _propose(dir4, A, 1, 2))
    assert res.note is None
    assert res.sends == [(None, Ack(A, 1))]


def test_next_view_messages_are_buffered_and_replayed(cfg4, dir4):
    follower = _node(1, cfg4, dir4)
    follower.start()
    # The view-2 leader's traffic arrives before this node has entered view 2.
    early = follower.handle_delivery(Fraction(1), 3, Ack(A, 2))
    assert early.note == "buffered"
    assert early.sends == []

    for sender in (2, 3):
        res = follower.handle_delivery(Fraction(2), sender, NewView(2))
        assert res.records == []
    res = follower.handle_delivery(Fraction(2), 4, NewView(2))
    assert (REC_ENTER_VIEW, 2) in res.records
    # Entry sends this node's vote to the view-2 leader and replays the buffer.
    assert any(dst == 3 for dst, _ in res.sends)
    assert follower.engine.acks[A] == {3}


def test_stale_and_far_future_notes(cfg4, dir4):
    follower = _node(1, cfg4, dir4)
    follower.start()
    res = follower.handle_delivery(Fraction(1), 2, Ack(A, 9))
    assert res.note == "beyond_buffer"
    for sender in (2, 3, 4):
        follower.handle_delivery(Fraction(2), sender, NewView(3))
    res = follower.handle_delivery(Fraction(3), 2, Ack(A, 1))
    assert res.note == "stale_view"


def test_skipped_view_buffer_discarded(cfg4, dir4):
    follower = _node(1, cfg4, dir4)
    follower.start()
    follower.handle_delivery(Fraction(1), 3, Ack(A, 2))
    # Everyone has moved on to view 3; the view-2 buffer must not replay.
    for sender in (2, 3, 4):
        res = follower.handle_delivery(Fraction(2), sender, NewView(3))
    assert (REC_ENTER_VIEW, 3) in res.records
    assert follower.buffer == []
    assert A not in follower.engine.acks or follower.engine.acks[A] == set()


def test_decide_recorded_exactly_once(cfg4, dir4):
    follower = _node(1, cfg4, dir4)
    follower.start()
    follower.handle_delivery(Fraction(1), 2, _propose(dir4, A, 1, 2))
    follower.handle_delivery(Fraction(1), 2, Ack(A, 1))
    follower.handle_delivery(Fraction(1), 3, Ack(A, 1))
    res = follower.handle_delivery(Fraction(1), 4, Ack(A, 1))
    assert (REC_DECIDE, A, 1) in res.records
    # Extra acks beyond the quorum must not produce a second record.
    res = follower.handle_delivery(Fraction(1), 2, Ack(A, 1))
    assert res.records == []
    assert follower.decided == (A, 1)


def test_timer_reschedules_until_decided(cfg4, dir4):
    follower = _node(1, cfg4, dir4)
    follower.start()
    res = follower.on_timer(Fraction(5))
    assert res.sends == [(None, NewView(2))]
    assert res.timer_at == Fraction(15)

    follower.handle_delivery(Fraction(6), 2, _propose(dir4, A, 1, 2))
    for sender in (2, 3, 4):
        follower.handle_delivery(Fraction(6), sender, Ack(A, 1))
    res = follower.on_timer(Fraction(15))
    assert res.sends == [] and res.timer_at is None


def test_four_nodes_decide_by_hand_pumping(cfg4, dir4):
    nodes = {p: _node(p, cfg4, dir4, A if p == 2 else B) for p in range(1, 5)}
    outbox = []
    for pid, node in nodes.items():
        res = node.start()
        outbox.extend((pid, dst, msg) for dst, msg in res.sends)
    for _ in range(3):
        batch, outbox = outbox, []
        for src, dst, msg in batch:
            # Broadcast includes self-delivery, matching simulator semantics.
            targets = list(nodes) if dst is None else [dst]
            for target in targets:
                res = nodes[target].handle_delivery(Fraction(1), src, msg)
                outbox.extend((target, d, m) for d, m in res.sends)
        if all(node.decided for node in nodes.values()):
            break
    assert {node.decided for node in nodes.values()} == {(A, 1)}
