"""Timeout doubling and NewView echo/entry thresholds."""

from fractions import Fraction

from fastbft.core import NewView
from fastbft.view_sync import ViewSync


def _sync(cfg4, base=Fraction(5)):
    return ViewSync(1, cfg4, base)


def test_timer_waits_until_timeout(cfg4):
    sync = _sync(cfg4)
    emissions, nxt = sync.on_timer(Fraction(3), decided=False)
    assert emissions == []
    assert nxt == Fraction(5)
    assert sync.timeout == Fraction(5)


def test_timer_fires_and_doubles(cfg4):
    sync = _sync(cfg4)
    emissions, nxt = sync.on_timer(Fraction(5), decided=False)
    assert emissions == [(None, NewView(2))]
    assert sync.timeout == Fraction(10)
    assert nxt == Fraction(15)
    # Still in view 1, so the next expiry fires again with a doubled timeout.
    emissions, nxt = sync.on_timer(Fraction(15), decided=False)
    assert emissions == [(None, NewView(2))]
    assert sync.timeout == Fraction(20)
    assert nxt == Fraction(35)


def test_decided_process_goes_quiet(cfg4):
    sync = _sync(cfg4)
    emissions, nxt = sync.on_timer(Fraction(50), decided=True)
    assert emissions == [] and nxt is None


def test_echo_at_f_plus_one_only_once(cfg4):
    sync = _sync(cfg4)
    emissions, enter = sync.on_new_view(NewView(2), 2)
    assert emissions == [] and enter is None
    emissions, enter = sync.on_new_view(NewView(2), 3)
    assert emissions == [(None, NewView(2))] and enter is None
    # A third announcer must not trigger a second echo.
    emissions, enter = sync.on_new_view(NewView(2), 2)
    assert emissions == [] and enter is None


def test_duplicate_announcers_count_once(cfg4):
    sync = _sync(cfg4)
    for _ in range(5):
        emissions, enter = sync.on_new_view(NewView(2), 2)
        assert enter is None


def test_enter_at_n_minus_f(cfg4):
    sync = _sync(cfg4)
    sync.on_new_view(NewView(2), 2)
    sync.on_new_view(NewView(2), 3)
    emissions, enter = sync.on_new_view(NewView(2), 4)
    assert enter == 2


def test_enter_picks_highest_eligible_view(cfg4):
    sync = _sync(cfg4)
    for sender in (2, 3, 4):
        sync.on_new_view(NewView(2), sender)
    for sender in (2, 3):
        sync.on_new_view(NewView(4), sender)
    emissions, enter = sync.on_new_view(NewView(4), 4)
    assert enter == 4


def test_stale_new_view_ignored(cfg4):
    sync = _sync(cfg4)
    sync.entered(3, Fraction(7))
    emissions, enter = sync.on_new_view(NewView(2), 2)
    assert emissions == [] and enter is None
    assert 2 not in sync.announcers


def test_entered_prunes_books_and_keeps_timeout(cfg4):
    sync = _sync(cfg4)
    sync.on_timer(Fraction(5), decided=False)
    assert sync.timeout == Fraction(10)
    for sender in (2, 3):
        sync.on_new_view(NewView(2), sender)
        sync.on_new_view(NewView(3), sender)
    sync.entered(2, Fraction(6))
    assert sync.current_view == 2
    assert sync.view_entry_time == Fraction(6)
    assert 2 not in sync.announcers
    assert 3 in sync.announcers
    # Timeouts never shrink on entry.
    assert sync.timeout == Fraction(10)
    emissions, nxt = sync.on_timer(Fraction(7), decided=False)
    assert emissions == [] and nxt == Fraction(16)
