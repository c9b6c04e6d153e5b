"""Bid-profile constructors: truthful, equilibrium and fixed."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .mechanism import StageOneOutcome, normalize_stage_two, run_stage_one
from .scenario import ZERO, Scenario, UserStrategy, ValidationError, feasible_horizon, pad, validate_schedule


def non_increasing_envelope(values: Sequence[Fraction]) -> tuple:
    """Cap each entry by its predecessor."""
    out = []
    for v in values:
        out.append(min(v, out[-1]) if out else v)
    return tuple(out)


def truthful_stage2(i: int, scenario: Scenario, horizon: int) -> tuple:
    return tuple(scenario.true_valuations[i][:horizon])


def lemma3_stage2(i: int, won: Sequence[int], jbbar: Sequence[Fraction], scenario: Scenario) -> tuple:
    """Winner's best stage-two report.

    Truthful on features it did not win; on a won feature ``k`` it reports
    just enough to close the gap ``jbbar(k) - pb_others(k)`` (never below 0).
    The result is repaired to stay non-increasing.
    """
    won = set(won)
    others = scenario.pb_others(i)
    pb = scenario.true_valuations[i]
    bids = []
    for k in range(1, len(jbbar) + 1):
        if k in won:
            bids.append(max(ZERO, jbbar[k - 1] - others[k - 1]))
        else:
            bids.append(pb[k - 1])
    return non_increasing_envelope(bids)


def lemma4_stage1(i: int, scenario: Scenario, opponents_max: Sequence[Fraction]) -> tuple:
    """Stage-one bid that is optimal feature by feature.

    Outbids the opponents' best (or the cost, whichever is higher) by one
    increment where the opponents' best is below the summed true value, bids
    0 where it is not, and never bids beyond the feasible horizon.  The
    result is per-feature optimal and need not be non-increasing.
    """
    horizon = feasible_horizon(scenario)
    total = scenario.pb_total
    opponents_max = pad(opponents_max, scenario.k_max)
    bids = []
    for k in range(scenario.k_max):
        if k < horizon and opponents_max[k] < total[k]:
            bids.append(max(scenario.costs[k], opponents_max[k]) + scenario.epsilon)
        else:
            bids.append(ZERO)
    return tuple(bids)


def equilibrium_stage1(scenario: Scenario) -> tuple:
    """User 1 bids the summed true value on the feasible prefix, everyone else 0."""
    horizon = feasible_horizon(scenario)
    total = scenario.pb_total
    lead = tuple(total[k] if k < horizon else ZERO for k in range(scenario.k_max))
    rest = (ZERO,) * scenario.k_max
    return (lead,) + (rest,) * (scenario.n - 1)


def equilibrium_stage2(scenario: Scenario, stage_one: StageOneOutcome) -> tuple:
    """Winners report per :func:`lemma3_stage2`, non-winners truthfully."""
    if stage_one.terminated:
        return ()
    rows = []
    for i in range(scenario.n):
        won = stage_one.wins(i)
        if won:
            rows.append(lemma3_stage2(i, won, stage_one.winning_bid, scenario))
        else:
            rows.append(truthful_stage2(i, scenario, stage_one.horizon))
    return tuple(rows)


def build_equilibrium_profile(scenario: Scenario) -> tuple:
    """Canonical equilibrium bids ``(stage1, stage2)``."""
    stage1 = equilibrium_stage1(scenario)
    stage_one = run_stage_one(stage1, scenario.costs)
    return stage1, equilibrium_stage2(scenario, stage_one)


def parse_strategies(names: str, n: int) -> tuple:
    """Comma-separated names; a single name applies to every user."""
    parts = [p.strip() for p in names.split(",") if p.strip()]
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise ValidationError(f"expected {n} strategies, got {len(parts)}")
    return tuple(UserStrategy(name=p) for p in parts)


def build_profile(scenario: Scenario, assignment: Sequence[UserStrategy] | None = None) -> tuple:
    """Bids ``(stage1, stage2)`` for a per-user strategy assignment.

    ``"equilibrium"`` users play their part of the canonical profile,
    ``"truthful"`` users bid their joint estimate then their true values,
    ``"fixed"`` users bid the vectors they carry.
    """
    if assignment is None:
        assignment = scenario.strategies or (UserStrategy(),) * scenario.n
    assignment = tuple(assignment)
    if len(assignment) != scenario.n:
        raise ValidationError(f"expected {scenario.n} strategies, got {len(assignment)}")
    for i, s in enumerate(assignment):
        if s.name == "fixed" and (s.stage1 is None or s.stage2 is None):
            raise ValidationError(f"user {i + 1}: fixed strategy needs stage1 and stage2 bids")

    canonical = equilibrium_stage1(scenario)
    stage1 = []
    for i, s in enumerate(assignment):
        if s.name == "equilibrium":
            stage1.append(canonical[i])
        elif s.name == "truthful":
            stage1.append(scenario.joint_estimates[i])
        else:
            if len(s.stage1) > scenario.k_max:
                raise ValidationError(f"user {i + 1}: stage1 longer than k_max")
            validate_schedule(s.stage1, "stage1", i + 1)
            stage1.append(pad(s.stage1, scenario.k_max))
    stage1 = tuple(stage1)

    stage_one = run_stage_one(stage1, scenario.costs)
    if stage_one.terminated:
        return stage1, ()
    horizon = stage_one.horizon
    stage2 = []
    for i, s in enumerate(assignment):
        won = stage_one.wins(i)
        if s.name == "fixed":
            validate_schedule(s.stage2, "stage2", i + 1)
            stage2.append(s.stage2)
        elif s.name == "equilibrium" and won:
            stage2.append(lemma3_stage2(i, won, stage_one.winning_bid, scenario))
        else:
            stage2.append(truthful_stage2(i, scenario, horizon))
    return stage1, normalize_stage_two(stage2, horizon)
