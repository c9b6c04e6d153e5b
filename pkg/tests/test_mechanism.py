from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from routershare.cost_sharing import pi
from routershare.mechanism import (
    IsWinner,
    NotAWinner,
    StageOneOutcome,
    choose_k_wu,
    compute_k_nwu,
    compute_winner_interval,
    nonwinner_payment,
    run_mechanism,
    run_stage_one,
    winner_payment,
)
from routershare.scenario import feasible_horizon, make_scenario
from routershare.strategies import build_equilibrium_profile

from .conftest import F

# scenario W at the equilibrium profile: user 1 wins both features at (12, 9),
# stage-two reports (5,4), (4,3), (3,2)
W_STAGE1 = StageOneOutcome(False, F(12, 9), (0, 0), 2)
W_IB = (F(5, 4), F(4, 3), F(3, 2))


def test_stage_one_terminates():
    assert run_stage_one([F(3), F(4)], F(5)).terminated


def test_stage_one_winners():
    out = run_stage_one([F(10, 6), F(8, 7)], F(4, 5))
    assert out == StageOneOutcome(False, F(10, 7), (0, 1), 2)
    assert out.index(0, 1) == 1 and out.index(1, 1) == 0


def test_stage_one_tie_goes_to_lowest_index():
    out = run_stage_one([F(10, 2), F(10, 3)], F(4, 5))
    assert out.winner[0] == 0
    assert out.horizon == 1


@pytest.mark.parametrize(
    "ib_total, expected",
    [((11, 6), 1), ((12, 9), 2), ((5, 1), 0)],
)
def test_k_nwu(ib_total, expected):
    ib = [F(*ib_total), F(0, 0)]
    assert compute_k_nwu(ib, F(10, 7), 2) == expected


def test_winner_interval_worked_scenario():
    iv = compute_winner_interval(0, W_IB, W_STAGE1, k_nwu=2)
    assert (iv.lower, iv.star, iv.star2) == (0, 2, 2)
    assert iv.permitted == (0, 1, 2)


def test_winner_interval_strict_single_feature():
    stage = StageOneOutcome(False, F(10), (0,), 1)
    iv = compute_winner_interval(0, [F(6), F(5)], stage, k_nwu=1)
    assert iv.lower == iv.star == 1


def test_winner_interval_star2_stops_before_next_win():
    # user 1 wins only feature 3 and fails it, so k* = 0 and k** = 3 - 1
    stage = StageOneOutcome(False, F(9, 9, 9, 9), (1, 1, 0, 1), 4)
    ib = [F(0, 0, 0, 0), F(9, 9, 0, 0)]
    iv = compute_winner_interval(0, ib, stage, k_nwu=compute_k_nwu(ib, stage.winning_bid, 4))
    assert (iv.star, iv.star2) == (0, 2)


def test_winner_interval_rejects_non_winner():
    with pytest.raises(NotAWinner):
        compute_winner_interval(1, W_IB, W_STAGE1, 2)


def test_nonwinner_payments_worked_scenario():
    costs = F(4, 6)
    p2 = nonwinner_payment(1, 2, W_IB, W_STAGE1, costs)
    # mu(12; 5,3; 4) = 4/3 and mu(9; 4,2; 6) = 2
    assert (p2.gamma, p2.delta, p2.net) == (Fraction(10, 3), 0, Fraction(10, 3))
    p3 = nonwinner_payment(2, 2, W_IB, W_STAGE1, costs)
    # mu(12; 5,4; 4) = 1 and mu(9; 4,3; 6) = 4/3
    assert p3.net == Fraction(7, 3)
    with pytest.raises(IsWinner):
        nonwinner_payment(0, 2, W_IB, W_STAGE1, costs)


def test_winner_payment_worked_scenario():
    p = winner_payment(0, 2, W_IB, W_STAGE1, F(4, 6))
    assert p.alpha1 == (4 - Fraction(7, 3)) + (6 - Fraction(10, 3)) == Fraction(13, 3)
    assert (p.alpha2, p.alpha3, p.alpha4) == (0, 0, 0)
    assert p.net == Fraction(13, 3)
    assert p.success == (1, 2) and p.failure == ()


def test_winner_with_only_failed_features():
    # every won feature falls short of its winning bid
    stage = StageOneOutcome(False, F(12, 9), (0, 0), 2)
    ib = (F(2, 1), F(4, 3), F(3, 2))
    p = winner_payment(0, 0, ib, stage, F(4, 6))
    assert p.success == () and p.failure == (1, 2)
    assert p.alpha1 == 0
    assert p.alpha4 > 0


def test_full_adoption_means_no_compensation():
    p = winner_payment(0, 2, W_IB, W_STAGE1, F(4, 6))
    assert p.alpha3 == 0


def test_choose_k_wu_worked_scenario(scenario_w):
    m, payment, utility = choose_k_wu(0, (0, 1, 2), scenario_w.true_valuations[0], W_IB, W_STAGE1, scenario_w.costs)
    assert (m, utility) == (2, Fraction(14, 3))
    assert choose_k_wu(0, (1,), scenario_w.true_valuations[0], W_IB, W_STAGE1, scenario_w.costs)[0] == 1


def test_choose_k_wu_tie_prefers_smaller_count():
    # winner of feature 2 only: adopting 0 gives 0 - (1/2 - 3) and adopting 1 gives 4 - (1 + 1/2)
    s = make_scenario([[2, 0], [4, 1]], [2, 5])
    stage = run_stage_one([F(8, 2), F(8, 6)], s.costs)
    ib = (F(4, 1), F(4, 3))
    iv = compute_winner_interval(1, ib, stage, compute_k_nwu(ib, stage.winning_bid, 2))
    assert iv.permitted == (0, 1)
    m, _, utility = choose_k_wu(1, iv.permitted, s.true_valuations[1], ib, stage, s.costs)
    assert (m, utility) == (0, Fraction(5, 2))


def test_run_mechanism_worked_scenario(scenario_w):
    stage1, stage2 = build_equilibrium_profile(scenario_w)
    out = run_mechanism(scenario_w, stage1, stage2)
    assert [p.net for p in out.payments] == [Fraction(13, 3), Fraction(10, 3), Fraction(7, 3)]
    assert out.utilities == (Fraction(14, 3), Fraction(11, 3), Fraction(8, 3))
    assert out.manufactured == (1, 2)
    assert out.total_payment == 10
    assert out.budget_residual(scenario_w.costs) == 0


def test_run_mechanism_terminated():
    s = make_scenario([[3], [4]], [5])
    out = run_mechanism(s, [F(3), F(4)], [])
    assert out.stage_one.terminated
    assert out.manufactured == ()
    assert all(p.net == 0 for p in out.payments)


def test_symmetric_single_feature_splits_evenly():
    s = make_scenario([[3], [3]], [4])
    out = run_mechanism(s, [F(6), F(0)], [F(3), F(3)])
    assert [p.net for p in out.payments] == [2, 2]


@st.composite
def small_games(draw):
    n = draw(st.integers(2, 4))
    k = draw(st.integers(1, 3))
    sched = lambda hi: sorted(draw(st.lists(st.integers(0, hi), min_size=k, max_size=k)), reverse=True)
    pb = [sched(8) for _ in range(n)]
    costs = sorted(draw(st.lists(st.integers(0, 12), min_size=k, max_size=k)))
    s = make_scenario(pb, costs)
    stage1 = [F(*sched(20)) for _ in range(n)]
    stage2 = [F(*sched(10)) for _ in range(n)]
    return s, stage1, stage2


@settings(max_examples=60, deadline=None)
@given(small_games())
def test_outcome_invariants(game):
    s, stage1, stage2 = game
    out = run_mechanism(s, stage1, stage2)
    again = run_mechanism(s, stage1, stage2)
    assert out == again
    for i, user in enumerate(out.users):
        p = user.payment
        if p.winner:
            assert p.net == p.alpha1 + p.alpha2 - p.alpha3 + p.alpha4
            assert min(p.alpha1, p.alpha2, p.alpha3, p.alpha4) >= 0
            assert set(p.success) | set(p.failure) == set(out.stage_one.wins(i))
        else:
            assert p.net == p.gamma - p.delta
            assert p.gamma >= 0 and p.delta >= 0
        assert user.utility == sum(s.true_valuations[i][: user.adoption]) - p.net
        if user.interval is not None:
            iv = user.interval
            assert iv.lower <= iv.star <= iv.star2
            assert user.adoption in iv.permitted
    assert 0 <= out.k_nwu <= out.stage_one.horizon


@settings(max_examples=60, deadline=None)
@given(small_games())
def test_equilibrium_payments_are_proportional_shares(game):
    s = game[0]
    stage1, stage2 = build_equilibrium_profile(s)
    out = run_mechanism(s, stage1, stage2)
    horizon = feasible_horizon(s)
    assert tuple(p.net for p in out.payments) == pi(s.true_valuations, s.costs, horizon)
