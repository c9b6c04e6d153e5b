"""The two-stage auction.

Stage one picks, per feature, the highest joint-benefit bid and fixes the
feature horizon.  Stage two collects individual-benefit bids, derives how many
features every user adopts, and charges non-winners ``gamma - delta`` and
winners ``alpha1 + alpha2 - alpha3 + alpha4``.

Feature numbers ``k`` in docstrings are 1-based; tuples are indexed ``k - 1``.
Users are 0-based indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .cost_sharing import mu
from .scenario import ZERO, Scenario, ScenarioError, column_sums, pad

__all__ = [
    "NotAWinner",
    "IsWinner",
    "StageOneOutcome",
    "WinnerInterval",
    "PaymentBreakdown",
    "UserResult",
    "MechanismOutcome",
    "run_stage_one",
    "compute_k_nwu",
    "compute_winner_interval",
    "nonwinner_payment",
    "winner_payment",
    "choose_k_wu",
    "user_result",
    "run_mechanism",
]


class NotAWinner(ScenarioError):
    pass


class IsWinner(ScenarioError):
    pass


@dataclass(frozen=True)
class StageOneOutcome:
    terminated: bool
    winning_bid: tuple = ()  # jb-bar(k), k = 1..horizon
    winner: tuple = ()  # winning user per feature
    horizon: int = 0

    def wins(self, i: int) -> tuple:
        """1-based features won by user ``i``."""
        return tuple(k for k, w in enumerate(self.winner, start=1) if w == i)

    def index(self, i: int, k: int) -> int:
        """Indicator that user ``i`` won feature ``k``."""
        return int(1 <= k <= self.horizon and self.winner[k - 1] == i)

    @property
    def winners(self) -> frozenset:
        return frozenset(self.winner)


TERMINATED = StageOneOutcome(terminated=True)


@dataclass(frozen=True)
class WinnerInterval:
    lower: int
    star: int
    star2: int
    permitted: tuple


@dataclass(frozen=True)
class PaymentBreakdown:
    winner: bool
    gamma: Fraction = ZERO
    delta: Fraction = ZERO
    alpha1: Fraction = ZERO
    alpha2: Fraction = ZERO
    alpha3: Fraction = ZERO
    alpha4: Fraction = ZERO
    success: tuple = ()  # L^S, winners only
    failure: tuple = ()  # L^F, winners only

    @property
    def net(self) -> Fraction:
        if self.winner:
            return self.alpha1 + self.alpha2 - self.alpha3 + self.alpha4
        return self.gamma - self.delta


NO_PAYMENT = PaymentBreakdown(winner=False)


@dataclass(frozen=True)
class UserResult:
    adoption: int
    payment: PaymentBreakdown
    utility: Fraction
    interval: WinnerInterval | None = None


@dataclass(frozen=True)
class MechanismOutcome:
    stage_one: StageOneOutcome
    stage_two_bids: tuple
    k_nwu: int
    manufactured: tuple
    users: tuple = field(default=())

    @property
    def adoption(self) -> tuple:
        return tuple(u.adoption for u in self.users)

    @property
    def payments(self) -> tuple:
        return tuple(u.payment for u in self.users)

    @property
    def utilities(self) -> tuple:
        return tuple(u.utility for u in self.users)

    @property
    def total_payment(self) -> Fraction:
        return sum((u.payment.net for u in self.users), ZERO)

    def manufactured_cost(self, costs: Sequence[Fraction]) -> Fraction:
        return sum((costs[k - 1] for k in self.manufactured), ZERO)

    def budget_residual(self, costs: Sequence[Fraction]) -> Fraction:
        return self.total_payment - self.manufactured_cost(costs)


# -- stage one --------------------------------------------------------------

def run_stage_one(bids: Sequence[Sequence[Fraction]], costs: Sequence[Fraction]) -> StageOneOutcome:
    """Select the per-feature winning bids; ties go to the lowest user index."""
    k_max = len(costs)
    bids = [pad(b, k_max) for b in bids]
    if max(b[0] for b in bids) <= costs[0]:
        return TERMINATED
    best, who = [], []
    for k in range(k_max):
        top = max(b[k] for b in bids)
        best.append(top)
        who.append(next(i for i, b in enumerate(bids) if b[k] == top))
    horizon = 0
    for k in range(k_max):
        if best[k] > costs[k]:
            horizon = k + 1
    return StageOneOutcome(False, tuple(best[:horizon]), tuple(who[:horizon]), horizon)


# -- stage two --------------------------------------------------------------

def _surplus(ib_total: Sequence[Fraction], jbbar: Sequence[Fraction]) -> list:
    return [ib_total[k] - jbbar[k] for k in range(len(jbbar))]


def compute_k_nwu(ib: Sequence[Sequence[Fraction]], jbbar: Sequence[Fraction], horizon: int) -> int:
    """Largest ``G`` in ``[0, horizon]`` maximising the cumulative reported surplus."""
    total = column_sums(ib)
    best_g, best, running = 0, ZERO, ZERO
    for g in range(1, horizon + 1):
        running += total[g - 1] - jbbar[g - 1]
        if running >= best:
            best_g, best = g, running
    return best_g


def compute_winner_interval(
    i: int,
    ib: Sequence[Sequence[Fraction]],
    stage_one: StageOneOutcome,
    k_nwu: int,
) -> WinnerInterval:
    """Thresholds bounding a winner's adoption and the resulting permitted counts."""
    won = stage_one.wins(i)
    if not won:
        raise NotAWinner(f"user {i + 1} won no feature")
    total = column_sums(ib)
    jbbar = stage_one.winning_bid
    lower = max([k for k in won if total[k - 1] > jbbar[k - 1]], default=0)
    star = max([k for k in won if total[k - 1] >= jbbar[k - 1]], default=0)
    star2 = min([stage_one.horizon] + [k - 1 for k in won if k > star])
    if star <= k_nwu <= star2:
        permitted = set(range(lower, star + 1)) | {k_nwu}
    else:
        permitted = set(range(lower, star2 + 1))
    return WinnerInterval(lower, star, star2, tuple(sorted(permitted)))


def _others(column: Sequence[Fraction], i: int) -> tuple:
    return tuple(v for j, v in enumerate(column) if j != i)


def _compensation(jb: Fraction, column: Sequence[Fraction], j: int, cost: Fraction) -> Fraction:
    """Clamped transfer ``jb - ib_{N/j} - mu`` for user ``j`` at one feature."""
    rest = _others(column, j)
    value = jb - sum(rest, ZERO) - mu(jb, rest, cost)
    return value if value > 0 else ZERO


def _columns(ib: Sequence[Sequence[Fraction]], horizon: int) -> list:
    return [tuple(row[k] for row in ib) for k in range(horizon)]


def nonwinner_payment(
    i: int,
    k_nwu: int,
    ib: Sequence[Sequence[Fraction]],
    stage_one: StageOneOutcome,
    costs: Sequence[Fraction],
) -> PaymentBreakdown:
    if stage_one.wins(i):
        raise IsWinner(f"user {i + 1} won features {stage_one.wins(i)}")
    jbbar, horizon = stage_one.winning_bid, stage_one.horizon
    cols = _columns(ib, horizon)
    gamma = sum((mu(jbbar[k], _others(cols[k], i), costs[k]) for k in range(k_nwu)), ZERO)
    delta = sum((_compensation(jbbar[k], cols[k], i, costs[k]) for k in range(k_nwu, horizon)), ZERO)
    return PaymentBreakdown(winner=False, gamma=gamma, delta=delta)


def winner_payment(
    i: int,
    k_wu: int,
    ib: Sequence[Sequence[Fraction]],
    stage_one: StageOneOutcome,
    costs: Sequence[Fraction],
) -> PaymentBreakdown:
    won = stage_one.wins(i)
    if not won:
        raise NotAWinner(f"user {i + 1} won no feature")
    jbbar, horizon = stage_one.winning_bid, stage_one.horizon
    cols = _columns(ib, horizon)
    n = len(ib)
    success = tuple(k for k in won if k <= k_wu and sum(cols[k - 1], ZERO) >= jbbar[k - 1])
    failure = tuple(k for k in won if k not in success)

    alpha1 = alpha2 = alpha3 = alpha4 = ZERO
    for k in success:
        col, jb, c = cols[k - 1], jbbar[k - 1], costs[k - 1]
        alpha1 += c - sum((mu(jb, _others(col, j), c) for j in range(n) if j != i), ZERO)
    for k in range(1, k_wu + 1):
        if k not in success:
            alpha2 += mu(jbbar[k - 1], _others(cols[k - 1], i), costs[k - 1])
    for k in range(k_wu + 1, horizon + 1):
        if k not in failure:
            alpha3 += _compensation(jbbar[k - 1], cols[k - 1], i, costs[k - 1])
    for k in failure:
        col, jb, c = cols[k - 1], jbbar[k - 1], costs[k - 1]
        alpha4 += sum((_compensation(jb, col, j, c) for j in range(n) if j != i), ZERO)
    return PaymentBreakdown(
        winner=True, alpha1=alpha1, alpha2=alpha2, alpha3=alpha3, alpha4=alpha4,
        success=success, failure=failure,
    )


def _benefit(pb: Sequence[Fraction], count: int) -> Fraction:
    return sum(pb[:count], ZERO)


def choose_k_wu(
    i: int,
    permitted: Sequence[int],
    pb: Sequence[Fraction],
    ib: Sequence[Sequence[Fraction]],
    stage_one: StageOneOutcome,
    costs: Sequence[Fraction],
) -> tuple:
    """Utility-maximising count in ``permitted``; ties go to the smaller count.

    Returns ``(count, payment, utility)``.
    """
    best = None
    for m in sorted(permitted):
        payment = winner_payment(i, m, ib, stage_one, costs)
        utility = _benefit(pb, m) - payment.net
        if best is None or utility > best[2]:
            best = (m, payment, utility)
    if best is None:
        raise ValueError("permitted set is empty")
    return best


def normalize_stage_two(ib: Sequence[Sequence[Fraction]], horizon: int) -> tuple:
    return tuple(pad(tuple(row)[:horizon], horizon) for row in ib)


def user_result(
    scenario: Scenario,
    stage_one: StageOneOutcome,
    ib: Sequence[Sequence[Fraction]],
    i: int,
    k_nwu: int | None = None,
) -> UserResult:
    """Adoption, payment and utility of a single user (``ib`` already normalized)."""
    if stage_one.terminated:
        return UserResult(0, NO_PAYMENT, ZERO)
    if k_nwu is None:
        k_nwu = compute_k_nwu(ib, stage_one.winning_bid, stage_one.horizon)
    pb = scenario.true_valuations[i]
    if stage_one.wins(i):
        interval = compute_winner_interval(i, ib, stage_one, k_nwu)
        m, payment, utility = choose_k_wu(i, interval.permitted, pb, ib, stage_one, scenario.costs)
        return UserResult(m, payment, utility, interval)
    payment = nonwinner_payment(i, k_nwu, ib, stage_one, scenario.costs)
    return UserResult(k_nwu, payment, _benefit(pb, k_nwu) - payment.net)


def run_mechanism(
    scenario: Scenario,
    stage1: Sequence[Sequence[Fraction]],
    stage2: Sequence[Sequence[Fraction]],
) -> MechanismOutcome:
    """Run both stages and assemble adoption, payments and utilities."""
    stage_one = run_stage_one(stage1, scenario.costs)
    if stage_one.terminated:
        zero = UserResult(0, NO_PAYMENT, ZERO)
        return MechanismOutcome(stage_one, (), 0, (), (zero,) * scenario.n)
    horizon = stage_one.horizon
    ib = normalize_stage_two(stage2, horizon)
    k_nwu = compute_k_nwu(ib, stage_one.winning_bid, horizon)
    total = column_sums(ib)
    manufactured = tuple(k for k in range(1, horizon + 1) if total[k - 1] >= stage_one.winning_bid[k - 1])
    users = tuple(user_result(scenario, stage_one, ib, i, k_nwu) for i in range(scenario.n))
    return MechanismOutcome(stage_one, ib, k_nwu, manufactured, users)
