"""Per-feature proportional cost sharing and the auxiliary share function.

``phi`` splits one feature's cost in proportion to the submitted values,
``pi`` sums those shares over the manufactured prefix of features, and ``mu``
is the share a hypothetical extra user would pay if its value were the
reference bid minus everybody else's total.  The ``check_*`` helpers test the
monotonicity properties pointwise and collect counterexamples instead of
assuming them.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .scenario import ZERO, ScenarioError

__all__ = [
    "DomainViolation",
    "PropertyViolation",
    "PropertyReport",
    "phi",
    "pi",
    "mu",
    "check_phi_monotonicity",
    "check_mu_properties",
    "sample_domain_point",
]


class DomainViolation(ScenarioError):
    pass


class PropertyViolation(AssertionError):
    def __init__(self, report: "PropertyReport"):
        self.report = report
        first = report.violations[0] if report.violations else {}
        super().__init__(f"{report.name}: {len(report.violations)} violation(s), first {first}")


@dataclass
class PropertyReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def record(self, holds: bool, **counterexample) -> None:
        self.checked += 1
        if not holds:
            self.violations.append(counterexample)

    def raise_if_violated(self) -> None:
        if self.violations:
            raise PropertyViolation(self)


def phi(values: Sequence[Fraction], cost: Fraction) -> tuple:
    """Split ``cost`` among users in exact proportion to ``values``.

    All-zero values with a positive cost fall back to an equal split so the
    rule stays total off the valid domain.
    """
    n = len(values)
    if cost == 0:
        return (ZERO,) * n
    total = sum(values, ZERO)
    if total == 0:
        return (Fraction(cost) / n,) * n
    return tuple(cost * v / total for v in values)


def pi(true_valuations: Sequence[Sequence[Fraction]], costs: Sequence[Fraction], horizon: int) -> tuple:
    """Total proportional share of each user over features ``1..horizon``."""
    n = len(true_valuations)
    totals = [ZERO] * n
    for k in range(horizon):
        column = [row[k] for row in true_valuations]
        if sum(column, ZERO) <= costs[k]:
            raise DomainViolation(
                f"feature {k + 1}: summed value {sum(column, ZERO)} does not exceed cost {costs[k]}"
            )
        for i, share in enumerate(phi(column, costs[k])):
            totals[i] += share
    return tuple(totals)


def mu(x: Fraction, others_values: Sequence[Fraction], cost: Fraction) -> Fraction:
    """Share of a virtual user whose value is ``x`` minus the others' total.

    Zero whenever the others' total exceeds ``x``.
    """
    s = sum(others_values, ZERO)
    if s > x:
        return ZERO
    return phi((x - s, *others_values), cost)[0]


# -- property checks --------------------------------------------------------

def sample_domain_point(rng: random.Random, n: int, max_value: int = 20, denominator: int = 1):
    """Random non-negative values with a cost strictly below their sum."""
    while True:
        values = tuple(Fraction(rng.randint(0, max_value), denominator) for _ in range(n))
        total = sum(values, ZERO)
        if total > 0:
            break
    cost = total * Fraction(rng.randint(0, 999), 1000)
    return values, cost


def check_phi_monotonicity(
    sample: Iterable[tuple], lam: Fraction, report: PropertyReport | None = None
) -> PropertyReport:
    """Check opponent-monotonicity and the ``lam``-shift bound of ``phi``.

    ``sample`` yields ``(values, cost)`` points.  For every user ``i`` and
    opponent ``j``: raising ``values[j]`` by ``lam`` must not raise ``i``'s
    share, and moving ``lam`` from ``i`` to ``j`` must not lower ``i``'s share
    by more than ``lam`` (only tested where ``values[i] >= lam``).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    report = report or PropertyReport("phi monotonicity")
    for values, cost in sample:
        base = phi(values, cost)
        n = len(values)
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                raised = list(values)
                raised[j] += lam
                after = phi(raised, cost)[i]
                report.record(
                    after <= base[i],
                    check="non-increasing in opponent value",
                    values=values, cost=cost, user=i, opponent=j, lam=lam,
                    before=base[i], after=after,
                )
                if values[i] < lam:
                    continue
                shifted = list(raised)
                shifted[i] -= lam
                moved = phi(shifted, cost)[i]
                report.record(
                    moved >= base[i] - lam,
                    check="lambda shift bound",
                    values=values, cost=cost, user=i, opponent=j, lam=lam,
                    before=base[i], after=moved,
                )
    return report


def check_mu_properties(
    sample: Iterable[tuple], lam: Fraction, report: PropertyReport | None = None
) -> PropertyReport:
    """Pointwise check of the three inequality chains for ``mu``.

    ``sample`` yields ``(x, others_values, cost)``.  Checked at each point and
    for each opponent ``j`` bumped by ``lam``:

    * ``mu`` is non-decreasing in ``x`` when the others' total is positive;
    * ``mu(x; others) >= mu(x; others + lam at j) >= mu(x; others) - lam``
      when ``x > 0``;
    * ``mu(x + lam; others + lam at j) <= mu(x; others)`` when the others'
      total is below ``x``.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    report = report or PropertyReport("mu properties")
    for x, others, cost in sample:
        others = tuple(others)
        s = sum(others, ZERO)
        a1 = mu(x, others, cost)
        if s > 0:
            up = mu(x + lam, others, cost)
            report.record(up >= a1, check="non-decreasing in x", x=x, others=others, cost=cost, lam=lam,
                          before=a1, after=up)
        for j in range(len(others)):
            bumped = list(others)
            bumped[j] += lam
            if x > 0:
                b1 = mu(x, bumped, cost)
                c1 = a1 - lam
                report.record(a1 >= b1 >= c1, check="A1 >= B1 >= C1", x=x, others=others, cost=cost,
                              opponent=j, lam=lam, A1=a1, B1=b1, C1=c1)
            if s < x:
                d1 = mu(x + lam, bumped, cost)
                report.record(d1 <= a1, check="D1 <= E1", x=x, others=others, cost=cost,
                              opponent=j, lam=lam, D1=d1, E1=a1)
    return report
