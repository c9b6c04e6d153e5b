"""Brute-force checks of the equilibrium claims on small instances.

Every check enumerates stage-two bid schedules on a finite grid and runs the
mechanism for each one, so nothing here relies on the case analysis the
claims were derived with.  Results are plain dicts with money rendered as
exact fractions, which makes reports reproducible byte for byte.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .cost_sharing import mu
from .mechanism import StageOneOutcome, normalize_stage_two, run_mechanism, run_stage_one, user_result
from .scenario import ZERO, Scenario, ScenarioError, feasible_horizon, format_money, random_scenario
from .strategies import build_equilibrium_profile, equilibrium_stage1, equilibrium_stage2, lemma3_stage2, truthful_stage2

DEFAULT_BUDGET = 200_000
DEFAULT_SAMPLES = 50
MAX_EXAMPLES = 5

GRID_NOTE = "grid-restricted: only non-increasing stage-two schedules on the bid grid are explored"


class GridBudgetExceeded(ScenarioError):
    def __init__(self, required: int, allowed: int, grid: "BidGrid | None" = None):
        self.required = required
        self.allowed = allowed
        hint = ""
        if grid is not None:
            hint = f"; try a smaller --cap (now {format_money(grid.cap)}) or a larger --eps (now {format_money(grid.epsilon)})"
        super().__init__(f"bid grid needs {required} points, budget allows {allowed}{hint}")


@dataclass(frozen=True)
class BidGrid:
    epsilon: Fraction
    cap: Fraction
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("grid increment must be positive")
        if self.cap < 0:
            raise ValueError("grid cap must be non-negative")

    @property
    def steps(self) -> int:
        return int(self.cap // self.epsilon)

    def size(self, dims: int) -> int:
        """Number of non-increasing schedules of length ``dims``."""
        return math.comb(self.steps + dims, dims)

    def points(self, dims: int) -> list:
        """All non-increasing schedules of length ``dims``, in lexicographic order."""
        required = self.size(dims)
        if required > self.budget:
            raise GridBudgetExceeded(required, self.budget, self)
        levels = [self.epsilon * s for s in range(self.steps + 1)]
        pts = [tuple(levels[s] for s in reversed(combo))
               for combo in itertools.combinations_with_replacement(range(self.steps + 1), dims)]
        pts.sort()
        return pts

    def truncates(self, scenario: Scenario) -> bool:
        return self.cap < max(v for row in scenario.true_valuations for v in row)


def default_grid(scenario: Scenario, epsilon: Fraction | None = None, cap: Fraction | None = None,
                 budget: int = DEFAULT_BUDGET) -> BidGrid:
    """Grid at the scenario increment, capped at the largest single valuation."""
    eps = Fraction(epsilon) if epsilon is not None else scenario.epsilon
    if cap is None:
        cap = max(v for row in scenario.true_valuations for v in row)
    return BidGrid(eps, Fraction(cap), budget)


@dataclass
class BestResponse:
    schedule: tuple
    utility: Fraction
    argmax: list
    evaluated: int
    cap_truncated: bool


@dataclass
class CheckResult:
    name: str
    passed: bool = True
    cases: int = 0
    ties: int = 0
    clamp_effects: int = 0
    counterexamples: list = field(default_factory=list)
    clamp_examples: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def clamped(self, example: dict) -> None:
        self.clamp_effects += 1
        if len(self.clamp_examples) < MAX_EXAMPLES:
            self.clamp_examples.append(example)

    def fail(self, example: dict) -> None:
        self.passed = False
        if len(self.counterexamples) < MAX_EXAMPLES:
            self.counterexamples.append(example)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "cases": self.cases,
            "ties": self.ties,
            "clamp_effects": self.clamp_effects,
            "counterexamples": [_jsonable(c) for c in self.counterexamples],
            "clamp_examples": [_jsonable(c) for c in self.clamp_examples],
            "notes": list(self.notes),
        }


@dataclass
class AuditReport:
    budget_residual: Fraction
    ir_violations: list
    efficiency_ok: bool
    manufactured: tuple
    horizon: int
    terminated: bool
    counterexamples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.budget_residual == 0 and not self.ir_violations and self.efficiency_ok

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "budget_residual": format_money(self.budget_residual),
            "ir_violations": list(self.ir_violations),
            "efficiency_ok": self.efficiency_ok,
            "manufactured": list(self.manufactured),
            "feasible_horizon": self.horizon,
            "terminated": self.terminated,
            "counterexamples": [_jsonable(c) for c in self.counterexamples],
        }


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return format_money(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _with_row(ib: Sequence[tuple], i: int, row: tuple) -> tuple:
    return tuple(row if j == i else r for j, r in enumerate(ib))


def _utility(scenario, stage_one, ib, i):
    return user_result(scenario, stage_one, ib, i).utility


def _clamp_binds(ib: Sequence[tuple], stage_one: StageOneOutcome, costs, users: Sequence[int]) -> bool:
    """True if some compensation summand for ``users`` would be negative before clamping."""
    for k in range(stage_one.horizon):
        column = [row[k] for row in ib]
        jb = stage_one.winning_bid[k]
        for j in users:
            rest = [v for m, v in enumerate(column) if m != j]
            if jb - sum(rest, ZERO) - mu(jb, rest, costs[k]) < 0:
                return True
    return False


def best_response_stage2(
    i: int,
    scenario: Scenario,
    fixed_others: Sequence[Sequence[Fraction]],
    stage_one: StageOneOutcome,
    grid: BidGrid,
) -> BestResponse:
    """Exhaustive search over user ``i``'s non-increasing grid schedules.

    ``fixed_others`` is a full stage-two bid matrix; row ``i`` is ignored.
    Ties resolve to the lexicographically smallest schedule.
    """
    if stage_one.terminated:
        raise ValueError("no stage two after termination")
    ib = normalize_stage_two(fixed_others, stage_one.horizon)
    best_u, argmax = None, []
    points = grid.points(stage_one.horizon)
    for point in points:
        u = _utility(scenario, stage_one, _with_row(ib, i, point), i)
        if best_u is None or u > best_u:
            best_u, argmax = u, [point]
        elif u == best_u:
            argmax.append(point)
    return BestResponse(argmax[0], best_u, argmax, len(points), grid.truncates(scenario))


def _sample_profiles(base: tuple, points: list, rng: random.Random, samples: int) -> list:
    profiles = [base]
    for _ in range(samples):
        profiles.append(tuple(rng.choice(points) for _ in base))
    return profiles


def check_lemma1(
    scenario: Scenario,
    stage_one: StageOneOutcome,
    grid: BidGrid,
    stage2: Sequence[Sequence[Fraction]] | None = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int | None = None,
) -> CheckResult:
    """Truthful stage-two reports are a best response for every non-winner.

    The base profile (``stage2``, equilibrium bids by default) is checked
    first, followed by ``samples`` opponent profiles drawn uniformly from the
    grid.  Grid schedules that tie with truthful utility while changing the
    adoption count are counted as ``ties``.  Gains on profiles where a
    compensation term is clamped at zero are counted as ``clamp_effects``,
    not as failures.
    """
    result = CheckResult("lemma1_nonwinner_truthful")
    result.notes.append(GRID_NOTE)
    if stage_one.terminated:
        result.notes.append("terminated in stage one; vacuous")
        return result
    nonwinners = [i for i in range(scenario.n) if not stage_one.wins(i)]
    if not nonwinners:
        result.notes.append("no non-winners; vacuous")
        return result
    horizon = stage_one.horizon
    base = normalize_stage_two(stage2 if stage2 is not None else equilibrium_stage2(scenario, stage_one), horizon)
    points = grid.points(horizon)
    rng = random.Random(scenario.seed if seed is None else seed)
    if grid.truncates(scenario):
        result.notes.append("cap-truncated")

    strict = 0
    for p, profile in enumerate(_sample_profiles(base, points, rng, samples)):
        for i in nonwinners:
            truthful = truthful_stage2(i, scenario, horizon)
            ib_true = _with_row(profile, i, truthful)
            reference = user_result(scenario, stage_one, ib_true, i)
            best_u, best_point, tied = reference.utility, None, False
            for point in points:
                ib = _with_row(profile, i, point)
                outcome = user_result(scenario, stage_one, ib, i)
                if outcome.utility > best_u:
                    best_u, best_point = outcome.utility, point
                elif outcome.utility == reference.utility and outcome.adoption != reference.adoption:
                    result.ties += 1
                    tied = True
            result.cases += 1
            strict += best_point is None and not tied
            if best_point is None:
                continue
            example = {"profile": p, "user": i + 1, "truthful": truthful, "truthful_utility": reference.utility,
                       "better_bid": best_point, "better_utility": best_u, "stage2": profile}
            if _clamp_binds(ib_true, stage_one, scenario.costs, [i]):
                result.clamped(example)
            else:
                result.fail(example)
    if result.ties:
        result.notes.append(
            f"weakly dominant only: truthful strictly beat every adoption-changing bid in {strict} of {result.cases} cases"
        )
    return result


def check_lemma2(
    scenario: Scenario,
    stage_one: StageOneOutcome,
    grid: BidGrid,
    stage2: Sequence[Sequence[Fraction]] | None = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int | None = None,
) -> CheckResult:
    """Truth on a winner's non-winning features weakly dominates other reports.

    For each winner and profile, the winner's reports on its won features
    are held fixed and every grid schedule agreeing with them is compared
    against the same report with the remaining coordinates set to the true
    values.
    """
    result = CheckResult("lemma2_winner_truthful_on_nonwinning")
    result.notes.append(GRID_NOTE)
    if stage_one.terminated:
        result.notes.append("terminated in stage one; vacuous")
        return result
    horizon = stage_one.horizon
    targets = [i for i in sorted(stage_one.winners) if len(stage_one.wins(i)) < horizon]
    if not targets:
        result.notes.append("no winner has a non-winning feature; vacuous")
        return result
    base = normalize_stage_two(stage2 if stage2 is not None else equilibrium_stage2(scenario, stage_one), horizon)
    points = grid.points(horizon)
    rng = random.Random(scenario.seed if seed is None else seed)
    if grid.truncates(scenario):
        result.notes.append("cap-truncated")

    for p, profile in enumerate(_sample_profiles(base, points, rng, samples)):
        for i in targets:
            won = [k - 1 for k in stage_one.wins(i)]
            own = profile[i]
            pb = scenario.true_valuations[i]
            truthful = tuple(own[k] if k in won else pb[k] for k in range(horizon))
            ib_true = _with_row(profile, i, truthful)
            u_true = _utility(scenario, stage_one, ib_true, i)
            best_u, best_point = u_true, None
            for point in points:
                if any(point[k] != own[k] for k in won):
                    continue
                u = _utility(scenario, stage_one, _with_row(profile, i, point), i)
                if u > best_u:
                    best_u, best_point = u, point
                elif u == u_true and point != truthful:
                    result.ties += 1
            result.cases += 1
            if best_point is None:
                continue
            example = {"profile": p, "user": i + 1, "truthful": truthful, "truthful_utility": u_true,
                       "better_bid": best_point, "better_utility": best_u, "stage2": profile}
            if _clamp_binds(ib_true, stage_one, scenario.costs, range(scenario.n)):
                result.clamped(example)
            else:
                result.fail(example)
    return result


def check_lemma3(
    scenario: Scenario,
    grid: BidGrid,
    stage1: Sequence[Sequence[Fraction]] | None = None,
) -> CheckResult:
    """Each winner's closing-the-gap report attains the brute-force optimum.

    Opponents report per the equilibrium stage-two rule for ``stage1``
    (canonical stage-one bids by default).
    """
    result = CheckResult("lemma3_winner_best_reply")
    result.notes.append(GRID_NOTE)
    stage1 = stage1 if stage1 is not None else equilibrium_stage1(scenario)
    stage_one = run_stage_one(stage1, scenario.costs)
    if stage_one.terminated:
        result.notes.append("terminated in stage one; vacuous")
        return result
    base = equilibrium_stage2(scenario, stage_one)
    if grid.truncates(scenario):
        result.notes.append("cap-truncated")
    for i in sorted(stage_one.winners):
        bid = lemma3_stage2(i, stage_one.wins(i), stage_one.winning_bid, scenario)
        u_bid = _utility(scenario, stage_one, _with_row(base, i, bid), i)
        oracle = best_response_stage2(i, scenario, base, stage_one, grid)
        result.cases += 1
        if u_bid == oracle.utility:
            result.ties += len(oracle.argmax) - (bid in oracle.argmax)
        elif u_bid < oracle.utility:
            result.fail({"user": i + 1, "lemma3_bid": bid, "lemma3_utility": u_bid,
                         "oracle_bid": oracle.schedule, "oracle_utility": oracle.utility})
    return result


def audit_equilibrium(scenario: Scenario) -> AuditReport:
    """Run the canonical equilibrium profile and audit budget, IR and efficiency."""
    stage1, stage2 = build_equilibrium_profile(scenario)
    outcome = run_mechanism(scenario, stage1, stage2)
    horizon = feasible_horizon(scenario)
    residual = outcome.budget_residual(scenario.costs)
    ir = [i + 1 for i, u in enumerate(outcome.utilities) if u < 0]
    efficient = len(outcome.manufactured) == horizon
    report = AuditReport(residual, ir, efficient, outcome.manufactured, horizon, outcome.stage_one.terminated)
    if not report.passed:
        report.counterexamples.append({"stage1": stage1, "stage2": stage2,
                                       "payments": [p.net for p in outcome.payments],
                                       "utilities": list(outcome.utilities)})
    return report


def split_stage1(scenario: Scenario) -> tuple | None:
    """Stage-one bids where user 1 wins feature 1 and user 2 wins the rest of the feasible prefix.

    Gives the winner-on-some-features situation the canonical profile lacks.
    ``None`` when fewer than two features are feasible.
    """
    horizon = feasible_horizon(scenario)
    if horizon < 2:
        return None
    total = scenario.pb_total
    zero = (ZERO,) * scenario.k_max
    first = (total[0],) + zero[1:]
    second = tuple(total[1] if k == 0 else (total[k] if k < horizon else ZERO) for k in range(scenario.k_max))
    return (first, second) + (zero,) * (scenario.n - 2)


def verify_scenario(scenario: Scenario, grid: BidGrid | None = None, samples: int = DEFAULT_SAMPLES,
                    seed: int | None = None) -> dict:
    """All checks on one scenario; ``passed`` is the conjunction."""
    grid = grid or default_grid(scenario)
    stage1 = equilibrium_stage1(scenario)
    stage_one = run_stage_one(stage1, scenario.costs)
    audit = audit_equilibrium(scenario)
    checks = [
        check_lemma1(scenario, stage_one, grid, samples=samples, seed=seed),
        check_lemma3(scenario, grid),
    ]
    split = split_stage1(scenario)
    lemma2_stage = run_stage_one(split, scenario.costs) if split is not None else stage_one
    checks.insert(1, check_lemma2(scenario, lemma2_stage, grid, samples=samples, seed=seed))
    if split is not None:
        checks[1].notes.append("stage one: user 1 wins feature 1, user 2 wins features 2..F")
    return {
        "grid": {"epsilon": format_money(grid.epsilon), "cap": format_money(grid.cap),
                 "cap_truncated": grid.truncates(scenario)},
        "audit": audit.to_dict(),
        "checks": [c.to_dict() for c in checks],
        "passed": audit.passed and all(c.passed for c in checks),
    }


def verify_random(n: int, k_max: int, seed: int, count: int, epsilon: Fraction = Fraction(1),
                  cap: Fraction | None = None, samples: int = DEFAULT_SAMPLES, max_value: int = 6,
                  budget: int = DEFAULT_BUDGET) -> dict:
    """Verify ``count`` random scenarios drawn from ``seed``."""
    rng = random.Random(seed)
    runs = []
    for idx in range(count):
        scenario = random_scenario(rng, n, k_max, epsilon=epsilon, max_value=max_value)
        grid = default_grid(scenario, epsilon, cap, budget)
        entry = {"index": idx, "seed": scenario.seed, "feasible_horizon": feasible_horizon(scenario)}
        entry.update(verify_scenario(scenario, grid, samples))
        runs.append(entry)
    return {"runs": runs, "passed": all(r["passed"] for r in runs)}
