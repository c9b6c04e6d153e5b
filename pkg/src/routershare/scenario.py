"""Domain types, validation and scenario-file ingestion.

All money is held as :class:`fractions.Fraction` so that budget balance can be
checked with ``==`` instead of a tolerance.  Schedules are plain tuples indexed
from 0 (feature ``k`` lives at position ``k - 1``); user indices in error
messages are 1-based.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

Money = Fraction
Schedule = tuple  # tuple[Fraction, ...]

ZERO = Fraction(0)

STRATEGY_NAMES = ("truthful", "equilibrium", "fixed")


class ScenarioError(Exception):
    """Base class for every input problem (exit code 2 at the CLI)."""


class ParseError(ScenarioError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(ScenarioError):
    """One or more violated invariants; ``violations`` lists each of them."""

    def __init__(self, message: str = "", violations: Sequence["ValidationError"] = ()):
        self.violations = list(violations) or [self]
        if not message:
            message = "; ".join(str(v) for v in self.violations)
        super().__init__(message)


class NonMonotoneSchedule(ValidationError):
    def __init__(self, what: str, user: int | None, index: int):
        self.what = what
        self.user = user
        self.index = index
        who = f"user {user} " if user is not None else ""
        super().__init__(f"{who}{what} schedule not monotone at index {index}")


class NegativeValue(ValidationError):
    def __init__(self, what: str, user: int | None, index: int):
        self.what = what
        self.user = user
        self.index = index
        who = f"user {user} " if user is not None else ""
        super().__init__(f"{who}{what} has a negative value at index {index}")


class EmptyScenario(ValidationError):
    pass


class NonPositiveIncrement(ValidationError):
    pass


def to_money(value: Any) -> Fraction:
    """Exact conversion; binary floats are refused."""
    if isinstance(value, bool):
        raise ParseError(f"boolean is not a money value: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"not an exact decimal or fraction: {value!r}") from None
    raise ParseError(f"money must be a decimal string, got {type(value).__name__} {value!r}")


def format_money(value: Fraction) -> str:
    """Lossless text form: ``"4"``, ``"9/2"``, ``"13/3"``."""
    return str(Fraction(value))


def schedule(values: Iterable[Any]) -> Schedule:
    return tuple(to_money(v) for v in values)


def pad(values: Sequence[Fraction], length: int) -> Schedule:
    values = tuple(values)
    return values + (ZERO,) * (length - len(values))


def column_sums(rows: Sequence[Sequence[Fraction]]) -> Schedule:
    return tuple(sum(col, ZERO) for col in zip(*rows))


@dataclass(frozen=True)
class UserStrategy:
    """Per-user strategy; ``stage1``/``stage2`` are used only for ``"fixed"``."""

    name: str = "equilibrium"
    stage1: Schedule | None = None
    stage2: Schedule | None = None


@dataclass(frozen=True)
class Scenario:
    n: int
    k_max: int
    true_valuations: tuple  # n schedules, pb_i
    joint_estimates: tuple  # n schedules, jb_i
    costs: Schedule
    epsilon: Fraction = Fraction(1)
    seed: int = 0
    strategies: tuple = field(default=(), compare=False)

    @property
    def pb_total(self) -> Schedule:
        """Per-feature sum of true valuations."""
        return column_sums(self.true_valuations)

    def pb_others(self, i: int) -> Schedule:
        return column_sums([row for j, row in enumerate(self.true_valuations) if j != i] or [(ZERO,) * self.k_max])


def make_scenario(
    true_valuations: Sequence[Sequence[Any]],
    costs: Sequence[Any],
    joint_estimates: Sequence[Sequence[Any]] | None = None,
    epsilon: Any = 1,
    seed: int = 0,
    k_max: int | None = None,
    strategies: Sequence[UserStrategy] = (),
) -> Scenario:
    """Build and validate a scenario from loosely typed values."""
    pb = tuple(schedule(row) for row in true_valuations)
    jb = tuple(schedule(row) for row in joint_estimates) if joint_estimates is not None else pb
    c = schedule(costs)
    if k_max is None:
        k_max = max([len(c)] + [len(r) for r in pb] + [len(r) for r in jb])
    raw = Scenario(
        n=len(pb),
        k_max=k_max,
        true_valuations=pb,
        joint_estimates=jb,
        costs=c,
        epsilon=to_money(epsilon),
        seed=seed,
        strategies=tuple(strategies),
    )
    return validate_scenario(raw)


def _check_schedule(values, what, user, non_increasing, errors):
    for idx, v in enumerate(values, start=1):
        if v < 0:
            errors.append(NegativeValue(what, user, idx))
    for idx in range(1, len(values)):
        prev, cur = values[idx - 1], values[idx]
        if (non_increasing and cur > prev) or (not non_increasing and cur < prev):
            errors.append(NonMonotoneSchedule(what, user, idx + 1))


def validate_schedule(values: Sequence[Fraction], what: str = "bid", user: int | None = None) -> None:
    """Raise if ``values`` is not a non-negative, non-increasing schedule."""
    errors: list[ValidationError] = []
    _check_schedule(tuple(values), what, user, True, errors)
    _raise(errors)


def _raise(errors: list[ValidationError]) -> None:
    if len(errors) == 1:
        raise errors[0]
    if errors:
        raise ValidationError(violations=errors)


def validate_scenario(raw: Scenario) -> Scenario:
    """Check every domain invariant and return the zero-padded scenario.

    Raises the specific :class:`ValidationError` subclass when exactly one
    invariant is violated, otherwise a :class:`ValidationError` whose
    ``violations`` attribute lists them all.
    """
    errors: list[ValidationError] = []
    if raw.n < 2 or len(raw.true_valuations) < 2:
        errors.append(EmptyScenario(f"need at least 2 users, got {len(raw.true_valuations)}"))
    if raw.k_max < 1:
        errors.append(EmptyScenario(f"need at least 1 feature, got k_max={raw.k_max}"))
    if raw.epsilon <= 0:
        errors.append(NonPositiveIncrement(f"bid increment must be positive, got {raw.epsilon}"))
    if len(raw.joint_estimates) != len(raw.true_valuations):
        errors.append(ValidationError("pb and jb must list the same users"))
    if raw.n != len(raw.true_valuations):
        errors.append(ValidationError(f"n={raw.n} but {len(raw.true_valuations)} users given"))

    rows = [("pb", raw.true_valuations), ("jb", raw.joint_estimates)]
    for what, table in rows:
        for u, values in enumerate(table, start=1):
            if what == "jb" and u <= len(raw.true_valuations) and values is raw.true_valuations[u - 1]:
                continue  # jb defaulted to pb; already checked
            if len(values) > raw.k_max:
                errors.append(ValidationError(f"user {u} {what} longer than k_max={raw.k_max}"))
            _check_schedule(values, what, u, True, errors)
    if len(raw.costs) > raw.k_max:
        errors.append(ValidationError(f"costs longer than k_max={raw.k_max}"))
    _check_schedule(raw.costs, "cost", None, False, errors)
    if raw.costs and len(raw.costs) < raw.k_max:
        # zero padding would break non-decreasing costs; the catalog must be fully priced
        errors.append(ValidationError(f"costs must cover all k_max={raw.k_max} features"))
    for s in raw.strategies:
        if s.name not in STRATEGY_NAMES:
            errors.append(ValidationError(f"unknown strategy {s.name!r}"))
    _raise(errors)

    k = raw.k_max
    return replace(
        raw,
        true_valuations=tuple(pad(r, k) for r in raw.true_valuations),
        joint_estimates=tuple(pad(r, k) for r in raw.joint_estimates),
        costs=pad(raw.costs, k),
    )


def feasible_horizon(scenario: Scenario) -> int:
    """Largest feature ``k`` whose summed true value strictly exceeds its cost (0 if none)."""
    horizon = 0
    for k, (total, cost) in enumerate(zip(scenario.pb_total, scenario.costs), start=1):
        if total > cost:
            horizon = k
    return horizon


# -- scenario files ---------------------------------------------------------

def _reject_float(text: str):
    raise ParseError(f"binary float {text} not allowed; quote money values as decimal strings")


def _parse_bids(entry: dict, key: str, user: int) -> Schedule | None:
    if key not in entry:
        return None
    if not isinstance(entry[key], list):
        raise ParseError(f"user {user}: {key!r} must be a list")
    return schedule(entry[key])


def parse_scenario(text: str) -> Scenario:
    """Parse the JSON scenario format and validate it."""
    try:
        doc = json.loads(text, parse_float=_reject_float)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object")
    try:
        users = doc["users"]
        costs = doc["costs"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(users, list) or not isinstance(costs, list):
        raise ParseError("'users' and 'costs' must be lists")

    pb, jb, strategies = [], [], []
    for u, entry in enumerate(users, start=1):
        if not isinstance(entry, dict) or "pb" not in entry:
            raise ParseError(f"user {u} needs a 'pb' list")
        pb.append(_parse_bids(entry, "pb", u))
        jb_row = _parse_bids(entry, "jb", u)
        jb.append(jb_row if jb_row is not None else pb[-1])
        strategies.append(
            UserStrategy(
                name=str(entry.get("strategy", "equilibrium")),
                stage1=_parse_bids(entry, "stage1", u),
                stage2=_parse_bids(entry, "stage2", u),
            )
        )

    n = doc.get("n", len(users))
    if n != len(users):
        raise ParseError(f"'n' is {n} but {len(users)} users listed")
    k_max = doc.get("k_max", max([len(costs)] + [len(r) for r in pb]))
    if not isinstance(k_max, int) or not isinstance(n, int):
        raise ParseError("'n' and 'k_max' must be integers")
    raw = Scenario(
        n=n,
        k_max=k_max,
        true_valuations=tuple(pb),
        joint_estimates=tuple(jb),
        costs=schedule(costs),
        epsilon=to_money(doc.get("epsilon", "1")),
        seed=int(doc.get("seed", 0)),
        strategies=tuple(strategies),
    )
    return validate_scenario(raw)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def scenario_to_dict(scenario: Scenario) -> dict:
    users = []
    for i in range(scenario.n):
        entry: dict[str, Any] = {
            "pb": [format_money(v) for v in scenario.true_valuations[i]],
            "jb": [format_money(v) for v in scenario.joint_estimates[i]],
        }
        if i < len(scenario.strategies):
            s = scenario.strategies[i]
            entry["strategy"] = s.name
            if s.stage1 is not None:
                entry["stage1"] = [format_money(v) for v in s.stage1]
            if s.stage2 is not None:
                entry["stage2"] = [format_money(v) for v in s.stage2]
        users.append(entry)
    return {
        "n": scenario.n,
        "k_max": scenario.k_max,
        "epsilon": format_money(scenario.epsilon),
        "seed": scenario.seed,
        "costs": [format_money(v) for v in scenario.costs],
        "users": users,
    }


def random_scenario(
    rng: random.Random,
    n: int,
    k_max: int,
    epsilon: Fraction = Fraction(1),
    max_value: int = 10,
    max_cost: int | None = None,
) -> Scenario:
    """Random scenario with every value on the ``epsilon`` grid.

    Valuations are drawn in ``[0, max_value]`` grid steps and sorted
    descending; costs are drawn in ``[0, max_cost]`` and sorted ascending.
    """
    if max_cost is None:
        max_cost = max(1, n * max_value // 2)
    pb = [sorted((rng.randint(0, max_value) for _ in range(k_max)), reverse=True) for _ in range(n)]
    jb = [sorted((rng.randint(0, n * max_value) for _ in range(k_max)), reverse=True) for _ in range(n)]
    costs = sorted(rng.randint(0, max_cost) for _ in range(k_max))
    eps = Fraction(epsilon)
    return make_scenario(
        [[v * eps for v in row] for row in pb],
        [v * eps for v in costs],
        joint_estimates=[[v * eps for v in row] for row in jb],
        epsilon=eps,
        seed=rng.randint(0, 2**31 - 1),
    )
