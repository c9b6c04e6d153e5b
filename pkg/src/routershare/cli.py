"""Command-line front end: ``run``, ``verify`` and ``sweep``.

Exit codes: 0 success, 1 verification failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, replace
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .mechanism import MechanismOutcome, run_mechanism
from .scenario import (
    ZERO,
    Scenario,
    ScenarioError,
    UserStrategy,
    format_money,
    load_scenario,
    to_money,
    validate_scenario,
)
from .strategies import build_profile, parse_strategies
from .verifier import DEFAULT_BUDGET, DEFAULT_SAMPLES, GRID_NOTE, default_grid, verify_random, verify_scenario

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

MONEY_FIELDS = ("gamma", "delta", "alpha1", "alpha2", "alpha3", "alpha4", "net", "utility")
CSV_HEADER = (
    ["scenario", "param", "value", "user", "strategy", "role", "adoption"]
    + [f for m in MONEY_FIELDS for f in (m, f"{m}_decimal")]
    + ["manufactured", "manufactured_cost", "residual"]
)


def decimal_text(value: Fraction, places: int = 6) -> str:
    """Fixed-point approximation, deterministic across platforms."""
    with localcontext() as ctx:
        ctx.prec = 50
        q = Decimal(value.numerator) / Decimal(value.denominator)
        return str(q.quantize(Decimal(1).scaleb(-places)))


@dataclass
class RunReport:
    scenario_id: str
    scenario: Scenario
    strategies: tuple
    outcome: MechanismOutcome

    def user_rows(self) -> list:
        rows = []
        winners = self.outcome.stage_one.winners
        for i, user in enumerate(self.outcome.users):
            p = user.payment
            row = {
                "user": str(i + 1),
                "strategy": self.strategies[i].name,
                "role": "winner" if i in winners and not self.outcome.stage_one.terminated else "non-winner",
                "adoption": str(user.adoption),
            }
            values = {"gamma": p.gamma, "delta": p.delta, "alpha1": p.alpha1, "alpha2": p.alpha2,
                      "alpha3": p.alpha3, "alpha4": p.alpha4, "net": p.net, "utility": user.utility}
            for name, v in values.items():
                row[name] = format_money(v)
                row[f"{name}_decimal"] = decimal_text(v)
            rows.append(row)
        return rows

    def totals_row(self) -> dict:
        # recomputed from the per-user rows on every call
        paid = sum((Fraction(r["net"]) for r in self.user_rows()), ZERO)
        built = self.outcome.manufactured_cost(self.scenario.costs)
        return {
            "user": "total",
            "net": format_money(paid),
            "net_decimal": decimal_text(paid),
            "manufactured": " ".join(str(k) for k in self.outcome.manufactured),
            "manufactured_cost": format_money(built),
            "residual": format_money(paid - built),
        }

    def stage_one_summary(self) -> str:
        s1 = self.outcome.stage_one
        if s1.terminated:
            return "terminated: no stage-one bid exceeds the first feature's cost; router not built"
        parts = [f"k={k}: user {w + 1} bid {format_money(b)}"
                 for k, (w, b) in enumerate(zip(s1.winner, s1.winning_bid), start=1)]
        return f"horizon {s1.horizon}; " + "; ".join(parts)

    def rows(self, param: str = "", value: str = "") -> list:
        if self.outcome.stage_one.terminated:
            body = []
        else:
            body = self.user_rows()
        out = []
        for r in body + [self.totals_row()]:
            full = {h: "" for h in CSV_HEADER}
            full.update(r)
            full.update(scenario=self.scenario_id, param=param, value=value)
            out.append(full)
        return out

    def render(self) -> str:
        lines = [f"scenario: {self.scenario_id}", f"stage one: {self.stage_one_summary()}"]
        if not self.outcome.stage_one.terminated:
            lines.append(f"non-winner adoption k_nwu: {self.outcome.k_nwu}")
            lines.append(f"{'user':>4} {'strategy':<12} {'role':<10} {'adopt':>5} {'net payment':>14} {'utility':>14}")
            for r in self.user_rows():
                lines.append(f"{r['user']:>4} {r['strategy']:<12} {r['role']:<10} {r['adoption']:>5} "
                             f"{r['net']:>14} {r['utility']:>14}")
        t = self.totals_row()
        lines.append(f"manufactured: {{{', '.join(t['manufactured'].split())}}}")
        lines.append(f"total payments: {t['net']}  manufactured cost: {t['manufactured_cost']}  residual: {t['residual']}")
        return "\n".join(lines)


def run_report(scenario: Scenario, scenario_id: str, strategies: Sequence[UserStrategy] | None = None) -> RunReport:
    assignment = tuple(strategies) if strategies else (scenario.strategies or (UserStrategy(),) * scenario.n)
    stage1, stage2 = build_profile(scenario, assignment)
    return RunReport(scenario_id, scenario, assignment, run_mechanism(scenario, stage1, stage2))


def write_csv(rows: Sequence[dict], target) -> None:
    writer = csv.DictWriter(target, fieldnames=CSV_HEADER, lineterminator="\r\n")
    writer.writeheader()
    writer.writerows(rows)


def _csv_text(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def _merge_strategies(scenario: Scenario, names: str | None) -> tuple | None:
    if not names:
        return None
    chosen = parse_strategies(names, scenario.n)
    carried = scenario.strategies or (UserStrategy(),) * scenario.n
    # keep any fixed bid vectors the scenario file carries
    return tuple(replace(carried[i], name=s.name) for i, s in enumerate(chosen))


def cmd_run(args) -> int:
    scenario = load_scenario(args.file)
    report = run_report(scenario, Path(args.file).stem, _merge_strategies(scenario, args.strategies))
    print(report.render())
    if args.csv:
        Path(args.csv).write_text(_csv_text(report.rows()), encoding="utf-8", newline="")
    return EXIT_OK


def cmd_verify(args) -> int:
    eps = to_money(args.eps) if args.eps is not None else None
    cap = to_money(args.cap) if args.cap is not None else None
    if args.random is not None:
        n, k, seed, count = args.random
        report = verify_random(n, k, seed, count, epsilon=eps or Fraction(1), cap=cap,
                               samples=args.samples, budget=args.budget)
        report = {"mode": "random", "n": n, "k_max": k, "seed": seed, "count": count, **report}
    elif args.file:
        scenario = load_scenario(args.file)
        grid = default_grid(scenario, eps, cap, args.budget)
        report = {"mode": "file", "scenario": Path(args.file).stem,
                  **verify_scenario(scenario, grid, args.samples)}
    else:
        raise ScenarioError("verify needs a scenario file or --random N K SEED COUNT")
    report = {"note": GRID_NOTE, "samples": args.samples, **report}
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["passed"] else EXIT_FAIL


SWEEP_PARAMS = ("cost_scale", "value_scale", "n")


def _frange(start: Fraction, stop: Fraction, step: Fraction) -> list:
    if step <= 0:
        raise ScenarioError("--step must be positive")
    values, v = [], start
    while v <= stop:
        values.append(v)
        v += step
    return values


def sweep_scenario(base: Scenario, param: str, value: Fraction) -> Scenario:
    if param == "cost_scale":
        return validate_scenario(replace(base, costs=tuple(c * value for c in base.costs)))
    if param == "value_scale":
        return validate_scenario(replace(
            base,
            true_valuations=tuple(tuple(v * value for v in row) for row in base.true_valuations),
            joint_estimates=tuple(tuple(v * value for v in row) for row in base.joint_estimates),
        ))
    if param == "n":
        if value.denominator != 1:
            raise ScenarioError(f"n must be an integer, got {value}")
        n = int(value)
        return validate_scenario(replace(
            base, n=n,
            true_valuations=(base.true_valuations[0],) * n,
            joint_estimates=(base.joint_estimates[0],) * n,
            strategies=(),
        ))
    raise ScenarioError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")


def sweep_rows(base: Scenario, scenario_id: str, param: str, start, stop, step) -> list:
    rows = []
    for value in _frange(to_money(start), to_money(stop), to_money(step)):
        scenario = sweep_scenario(base, param, value)
        rows.extend(run_report(scenario, scenario_id).rows(param, format_money(value)))
    return rows


def cmd_sweep(args) -> int:
    base = load_scenario(args.file)
    if args.param not in SWEEP_PARAMS:
        raise ScenarioError(f"unknown sweep parameter {args.param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    rows = sweep_rows(base, Path(args.file).stem, args.param, args.start, args.stop, args.step)
    text = _csv_text(rows)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="routershare", description="Two-stage router cost-sharing auction")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the mechanism on a scenario file")
    run.add_argument("file")
    run.add_argument("--strategies", help="comma-separated truthful|equilibrium|fixed, one per user or one for all")
    run.add_argument("--csv", help="also write the report as CSV")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="brute-force equilibrium checks")
    verify.add_argument("file", nargs="?")
    verify.add_argument("--random", nargs=4, type=int, metavar=("N", "K", "SEED", "COUNT"))
    verify.add_argument("--eps", help="grid increment (default: scenario epsilon)")
    verify.add_argument("--cap", help="largest grid bid (default: largest single valuation)")
    verify.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="sampled opponent profiles")
    verify.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="max grid points per search")
    verify.set_defaults(func=cmd_verify)

    sweep = sub.add_parser("sweep", help="CSV of outcomes across a parameter range")
    sweep.add_argument("file")
    sweep.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    sweep.add_argument("--from", dest="start", required=True)
    sweep.add_argument("--to", dest="stop", required=True)
    sweep.add_argument("--step", required=True)
    sweep.add_argument("--csv")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except ScenarioError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
