"""Benchmark scoring.

Rates are computed per instance and then averaged, so every instance has
the same weight regardless of how many checks apply to it:

  micro (per family)  mean over instances of (passed / applicable); an
                      instance with no applicable checks in the family
                      counts as 1.0
  macro (per family)  fraction of instances with every applicable check
                      in the family passing
  final pass rate     fraction of instances with every applicable check
                      in BOTH families passing

Undelivered instances are scored conservatively: they contribute 0 to
every rate they participate in, including the vacuous cases. With those
conventions both report identities (macro <= micro per family, and the
final pass rate <= min of the family macros) hold by construction.

Checks that do not apply to an instance are left out of both numerator
and denominator everywhere, including the per-constraint table.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .constraints import COMMONSENSE, HARD, constraint_ids, is_applicable
from .orchestrator import PlanOutcome
from .request import StructuredQuery

UNDELIVERED_POLICY = "undelivered instances count as failing every applicable check"


@dataclass(frozen=True)
class FamilyRates:
    micro: float
    macro: float


@dataclass(frozen=True)
class RateBlock:
    n_instances: int
    delivery_rate: float
    commonsense: FamilyRates
    hard: FamilyRates
    final_pass_rate: float


@dataclass(frozen=True)
class ConstraintRow:
    family: str
    name: str
    n_applicable: int
    n_passed: int

    @property
    def rate(self) -> float | None:
        if self.n_applicable == 0:
            return None
        return self.n_passed / self.n_applicable


@dataclass(frozen=True)
class BenchmarkReport:
    overall: RateBlock
    tiers: tuple[tuple[str, RateBlock], ...]
    per_constraint: tuple[ConstraintRow, ...]

    def to_json(self) -> dict:
        return {
            "policy": UNDELIVERED_POLICY,
            "overall": _block_to_json(self.overall),
            "tiers": {tier: _block_to_json(block) for tier, block in self.tiers},
            "per_constraint": [
                {
                    "family": row.family,
                    "name": row.name,
                    "n_applicable": row.n_applicable,
                    "n_passed": row.n_passed,
                    "rate": None if row.rate is None else round(row.rate, 6),
                }
                for row in self.per_constraint
            ],
        }


def _block_to_json(block: RateBlock) -> dict:
    return {
        "n_instances": block.n_instances,
        "delivery_rate": round(block.delivery_rate, 6),
        "commonsense": {
            "micro": round(block.commonsense.micro, 6),
            "macro": round(block.commonsense.macro, 6),
        },
        "hard": {
            "micro": round(block.hard.micro, 6),
            "macro": round(block.hard.macro, 6),
        },
        "final_pass_rate": round(block.final_pass_rate, 6),
    }


@dataclass(frozen=True)
class _InstanceScore:
    tier: str
    delivered: bool
    cs_fraction: float
    cs_all: bool
    hard_fraction: float
    hard_all: bool
    final_pass: bool


def _family_score(outcome: PlanOutcome, family: str) -> tuple[float, bool]:
    results = outcome.final_report.family_results(family)
    if not results:
        return 1.0, True
    passed = sum(1 for r in results if r.passed)
    return passed / len(results), passed == len(results)


def _score_instance(q: StructuredQuery, outcome: PlanOutcome | None) -> _InstanceScore:
    if outcome is None:
        return _InstanceScore(q.tier, False, 0.0, False, 0.0, False, False)
    cs_fraction, cs_all = _family_score(outcome, COMMONSENSE)
    hard_fraction, hard_all = _family_score(outcome, HARD)
    return _InstanceScore(
        q.tier, True, cs_fraction, cs_all, hard_fraction, hard_all, cs_all and hard_all
    )


def _rates(scores: list[_InstanceScore]) -> RateBlock:
    n = len(scores)
    return RateBlock(
        n_instances=n,
        delivery_rate=sum(1 for s in scores if s.delivered) / n,
        commonsense=FamilyRates(
            micro=sum(s.cs_fraction for s in scores) / n,
            macro=sum(1 for s in scores if s.cs_all) / n,
        ),
        hard=FamilyRates(
            micro=sum(s.hard_fraction for s in scores) / n,
            macro=sum(1 for s in scores if s.hard_all) / n,
        ),
        final_pass_rate=sum(1 for s in scores if s.final_pass) / n,
    )


def evaluate(pairs: list[tuple[StructuredQuery, PlanOutcome | None]]) -> BenchmarkReport:
    """Score a batch of (query, outcome) pairs. An outcome of None marks an
    undelivered instance. Raises ValueError on an empty batch."""
    if not pairs:
        raise ValueError("cannot evaluate an empty batch")
    scores = [_score_instance(q, outcome) for q, outcome in pairs]

    rows = []
    for cid in constraint_ids():
        n_applicable = 0
        n_passed = 0
        for (q, outcome), score in zip(pairs, scores):
            if not is_applicable(cid, q):
                continue
            n_applicable += 1
            if score.delivered:
                result = outcome.final_report.result_for(cid.name)
                if result is not None and result.passed:
                    n_passed += 1
        rows.append(ConstraintRow(cid.family, cid.name, n_applicable, n_passed))

    tiers = []
    for tier in ("easy", "medium", "hard"):
        subset = [s for s in scores if s.tier == tier]
        if subset:
            tiers.append((tier, _rates(subset)))

    return BenchmarkReport(
        overall=_rates(scores),
        tiers=tuple(tiers),
        per_constraint=tuple(rows),
    )


def _fmt_rate(value: float | None) -> str:
    if value is None:
        return "n/a"
    return f"{value * 100.0:.1f}%"


def _block_lines(label: str, block: RateBlock) -> list[str]:
    return [
        f"{label}: n={block.n_instances}"
        f"  delivery={_fmt_rate(block.delivery_rate)}"
        f"  commonsense micro/macro={_fmt_rate(block.commonsense.micro)}/{_fmt_rate(block.commonsense.macro)}"
        f"  hard micro/macro={_fmt_rate(block.hard.micro)}/{_fmt_rate(block.hard.macro)}"
        f"  final={_fmt_rate(block.final_pass_rate)}"
    ]


def render_text(report: BenchmarkReport) -> str:
    out = io.StringIO()
    print(f"# policy: {UNDELIVERED_POLICY}", file=out)
    for line in _block_lines("overall", report.overall):
        print(line, file=out)
    for tier, block in report.tiers:
        for line in _block_lines(f"tier {tier}", block):
            print(line, file=out)
    print("", file=out)
    name_width = max(len(row.name) for row in report.per_constraint)
    print(f"{'constraint':<{name_width}}  {'family':<11}  {'applicable':>10}  {'passed':>6}  rate", file=out)
    for row in report.per_constraint:
        print(
            f"{row.name:<{name_width}}  {row.family:<11}  {row.n_applicable:>10}  {row.n_passed:>6}  {_fmt_rate(row.rate)}",
            file=out,
        )
    return out.getvalue()


def render_csv(report: BenchmarkReport) -> str:
    lines = ["family,name,n_applicable,n_passed,rate"]
    for row in report.per_constraint:
        rate = "" if row.rate is None else f"{row.rate:.6f}"
        lines.append(f"{row.family},{row.name},{row.n_applicable},{row.n_passed},{rate}")
    return "\n".join(lines) + "\n"


def summary_line(report: BenchmarkReport) -> str:
    return _block_lines("benchmark", report.overall)[0]
