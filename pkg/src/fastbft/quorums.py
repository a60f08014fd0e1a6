"""Threshold arithmetic and the three quorum-intersection properties.

Each intersection property is decided two ways: a closed-form inequality and,
for n <= 12, a brute-force sweep over every pair of quorums with Byzantine
processes packed adversarially into the intersection. The two verdicts must
agree; the enumeration exists to catch the arithmetic being wrong, so it never
calls the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Optional, Tuple

VANILLA = "vanilla"
GENERALIZED = "generalized"

BRUTE_FORCE_MAX_N = 12


class ResilienceViolation(ValueError):
    pass


class ModeMismatch(ValueError):
    pass


@dataclass(slots=True, frozen=True)
class QuorumConfig:
    n: int
    f: int
    t: int
    mode: str


def new_config(n: int, f: int, t: int, mode: str = VANILLA) -> QuorumConfig:
    """Validate and build a config.

    Vanilla requires t = f and n >= 5f-1; generalized requires n >= 3f+2t-1.
    Note 5f-1 = 3f+2t-1 when t = f, so one resilience bound covers both.
    """
    if mode not in (VANILLA, GENERALIZED):
        raise ModeMismatch(f"unknown mode {mode!r}")
    if f < 1 or t < 1 or t > f:
        raise ResilienceViolation(f"need 1 <= t <= f, got f={f}, t={t}")
    if n < 3 * f + 2 * t - 1:
        raise ResilienceViolation(f"need n >= 3f+2t-1 = {3 * f + 2 * t - 1}, got n={n}")
    if mode == VANILLA and t != f:
        raise ModeMismatch(f"vanilla mode requires t = f, got f={f}, t={t}")
    return QuorumConfig(n, f, t, mode)


def vote_quorum(cfg: QuorumConfig) -> int:
    return cfg.n - cfg.f


def fast_decide_quorum(cfg: QuorumConfig) -> int:
    return cfg.n - cfg.f if cfg.mode == VANILLA else cfg.n - cfg.t


def cert_ack_threshold(cfg: QuorumConfig) -> int:
    return cfg.f + 1


def cert_fanout(cfg: QuorumConfig) -> int:
    return 2 * cfg.f + 1


def commit_cert_threshold(cfg: QuorumConfig) -> int:
    if cfg.mode != GENERALIZED:
        raise ModeMismatch("commit certificates exist only in generalized mode")
    return -(-(cfg.n + cfg.f + 1) // 2)


def equivocation_vote_threshold(cfg: QuorumConfig) -> int:
    return 2 * cfg.f if cfg.mode == VANILLA else cfg.f + cfg.t


@dataclass(slots=True)
class IntersectionReport:
    qi1: bool
    qi2: bool
    qi3: bool
    brute_qi1: Optional[bool] = None
    brute_qi2: Optional[bool] = None
    brute_qi3: Optional[bool] = None
    witness: Optional[dict] = None

    def agrees(self) -> bool:
        if self.brute_qi1 is None:
            return True
        return (self.qi1, self.qi2, self.qi3) == (self.brute_qi1, self.brute_qi2, self.brute_qi3)


def _masks(n: int, size: int) -> list:
    out = []
    for combo in combinations(range(n), size):
        m = 0
        for i in combo:
            m |= 1 << i
        out.append(m)
    return out


def _mask_pids(mask: int) -> Tuple[int, ...]:
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def _worst_correct(inter: int, byz_budget: int) -> Tuple[int, int]:
    """Correct-process count in an intersection after packing byz into it.

    The adversary minimizes correct members, so it spends its budget inside
    the intersection first. Returns (correct count, byz mask used).
    """
    size = inter.bit_count()
    placed = min(byz_budget, size)
    byz = 0
    taken = 0
    i = 0
    while taken < placed:
        if inter >> i & 1:
            byz |= 1 << i
            taken += 1
        i += 1
    return size - placed, byz


def _sweep(q1_masks, q2_masks, byz_budget: int, need_correct: int) -> Tuple[bool, Optional[dict]]:
    for q1 in q1_masks:
        for q2 in q2_masks:
            correct, byz = _worst_correct(q1 & q2, byz_budget)
            if correct < need_correct:
                return False, {
                    "q1": _mask_pids(q1),
                    "q2": _mask_pids(q2),
                    "byz": _mask_pids(byz),
                    "correct_in_intersection": correct,
                    "required": need_correct,
                }
    return True, None


def check_intersection_properties(cfg: QuorumConfig) -> IntersectionReport:
    """Decide QI1-QI3 for cfg, closed-form always and by enumeration for n <= 12.

    Accepts raw QuorumConfig instances that new_config would reject, which is
    how the n = 5f-2 counterexample gets exercised.
    """
    n, f = cfg.n, cfg.f
    report = IntersectionReport(
        qi1=2 * (n - f) - n >= f + 1,
        qi2=2 * (n - f) - n >= (f - 1) + 2 * f,
        qi3=(n - f) + 2 * f - n >= (f - 1) + 1,
    )
    if n > BRUTE_FORCE_MAX_N:
        return report
    big = _masks(n, n - f)
    small = _masks(n, 2 * f) if 2 * f <= n else []
    # QI1 is a plain size bound: every pair of (n-f)-quorums overlaps in f+1
    # processes. QI2 and QI3 subtract the f-1 Byzantine processes that may
    # survive excluding the equivocating leader.
    ok1, w1 = _sweep(big, big, 0, f + 1)
    ok2, w2 = _sweep(big, big, f - 1, 2 * f)
    if small:
        ok3, w3 = _sweep(big, small, f - 1, 1)
    else:
        ok3, w3 = False, {"reason": f"no set of 2f={2 * f} processes fits n={n}"}
    report.brute_qi1, report.brute_qi2, report.brute_qi3 = ok1, ok2, ok3
    report.witness = w1 or w2 or w3
    return report


def generalized_ack_vote_intersection(cfg: QuorumConfig) -> Tuple[bool, Optional[bool]]:
    """Any (n-f)-set of voters meets any (n-t)-set of ackers in (f-1)+(f+t) processes.

    Returns (closed-form verdict, brute-force verdict or None for n > 12).
    """
    n, f, t = cfg.n, cfg.f, cfg.t
    need = (f - 1) + (f + t)
    closed = (n - f) + (n - t) - n >= need
    if n > BRUTE_FORCE_MAX_N:
        return closed, None
    ok, _ = _sweep(_masks(n, n - f), _masks(n, n - t), 0, need)
    return closed, ok


def commit_certs_share_correct(cfg: QuorumConfig) -> Tuple[bool, Optional[bool]]:
    """Two commit-certificate signer sets always intersect in a correct process."""
    n, f = cfg.n, cfg.f
    thr = -(-(n + f + 1) // 2)
    closed = 2 * thr - n >= f + 1
    if n > BRUTE_FORCE_MAX_N:
        return closed, None
    masks = _masks(n, thr)
    ok, _ = _sweep(masks, masks, f, 1)
    return closed, ok


def valid_configs(max_n: int) -> Iterator[QuorumConfig]:
    """Every config new_config accepts with n <= max_n, both modes."""
    for n in range(1, max_n + 1):
        for f in range(1, n + 1):
            for t in range(1, f + 1):
                for mode in (VANILLA, GENERALIZED):
                    try:
                        yield new_config(n, f, t, mode)
                    except (ResilienceViolation, ModeMismatch):
                        continue
