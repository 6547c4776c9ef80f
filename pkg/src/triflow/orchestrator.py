"""State-machine controller for the whole pipeline.

One run walks Init -> Retrieval -> Planning -> Governance -> Delivered, with
a bounded Governance -> Planning recompute edge: if the governed plan still
has empty required slots, the run widens the retrieval candidate caps and
replans, keeping whichever outcome scores best. Infeasibility never refuses
delivery; the worst case is an honest plan with failing checks reported.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .agent import (
    AgentHandle,
    GOVERNANCE_TEMPERATURE,
    PLANNING_TEMPERATURE,
    RETRIEVAL_TEMPERATURE,
    make_agent,
)
from .constraints import ConstraintReport, check_all
from .errors import (
    IllegalTransition,
    InfeasibleRetrieval,
    RequestValidationError,
    SandboxIntegrityError,
    SkeletonInfeasible,
)
from .governance import GovernanceTrace, build_system_report, govern, objective
from .planner import CommitmentLedger, DayPlan, Itinerary, plan
from .request import StructuredQuery, UserRequest, decompose_query
from .retrieval import RetrievedSubset, retrieve_subset
from .sandbox import SandboxDataset, validate_integrity


class PipelineState(Enum):
    INIT = "Init"
    RETRIEVAL = "Retrieval"
    PLANNING = "Planning"
    GOVERNANCE = "Governance"
    DELIVERED = "Delivered"
    FAILED = "Failed"


_LEGAL_TRANSITIONS: dict[PipelineState, frozenset[PipelineState]] = {
    PipelineState.INIT: frozenset({PipelineState.RETRIEVAL, PipelineState.FAILED}),
    PipelineState.RETRIEVAL: frozenset({PipelineState.PLANNING, PipelineState.FAILED}),
    PipelineState.PLANNING: frozenset({PipelineState.GOVERNANCE, PipelineState.FAILED}),
    PipelineState.GOVERNANCE: frozenset(
        {PipelineState.PLANNING, PipelineState.DELIVERED, PipelineState.FAILED}
    ),
    PipelineState.DELIVERED: frozenset(),
    PipelineState.FAILED: frozenset(),
}


class StateMachine:
    def __init__(self):
        self.state = PipelineState.INIT
        self.history: list[PipelineState] = [PipelineState.INIT]

    def transition(self, to: PipelineState) -> None:
        if to not in _LEGAL_TRANSITIONS[self.state]:
            raise IllegalTransition(f"illegal transition {self.state.value} -> {to.value}")
        self.state = to
        self.history.append(to)


@dataclass(frozen=True)
class PipelineConfig:
    retrieval_temperature: float = RETRIEVAL_TEMPERATURE
    planning_temperature: float = PLANNING_TEMPERATURE
    governance_temperature: float = GOVERNANCE_TEMPERATURE
    max_governance_iterations: int = 8
    candidate_caps: tuple[int | None, ...] = (20, 50, None)
    recompute_rounds: int = 2
    agent_backend: str = "mock"
    seed: int = 0

    @classmethod
    def from_json(cls, obj: dict) -> PipelineConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise RequestValidationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "candidate_caps" in kwargs:
            kwargs["candidate_caps"] = tuple(kwargs["candidate_caps"])
        return cls(**kwargs)


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            obj = json.load(handle)
        except json.JSONDecodeError as exc:
            raise RequestValidationError(f"{path}: invalid config JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise RequestValidationError(f"{path}: config must be a JSON object")
    return PipelineConfig.from_json(obj)


@dataclass(frozen=True)
class PlanOutcome:
    query: StructuredQuery
    itinerary: Itinerary
    trace: GovernanceTrace
    final_report: ConstraintReport
    subset: RetrievedSubset = field(repr=False)
    timings_ms: dict = field(default_factory=dict)
    agent_calls: int = 0
    recompute_rounds_used: int = 0
    state_history: tuple[str, ...] = ()


def _stub_itinerary(q: StructuredQuery) -> Itinerary:
    # last-resort shell when no skeleton exists: every day sits at the
    # origin with nothing planned, and the report says so honestly
    return Itinerary(
        days=tuple(
            DayPlan(day_index=i, date=q.dates[i], city_or_transition=q.origin)
            for i in range(q.days)
        ),
        ledger=CommitmentLedger(),
    )


def run_pipeline(
    r: UserRequest,
    d: SandboxDataset,
    config: PipelineConfig | None = None,
    agent: AgentHandle | None = None,
    on_step: Callable[[str, Itinerary], None] | None = None,
) -> PlanOutcome:
    """Execute decompose -> retrieve -> plan -> govern with bounded
    recompute. Always returns a delivered outcome; the only exceptions that
    escape are input validation errors and dataset integrity failures."""
    config = config or PipelineConfig()
    integrity = validate_integrity(d)
    if not integrity.is_clean:
        first = integrity.violations[0]
        raise SandboxIntegrityError(
            f"dataset fails integrity validation: {first.category} on {first.record}: {first.message}"
        )
    if agent is None:
        agent = make_agent(config.agent_backend, config.seed)

    machine = StateMachine()
    timings = {"retrieval": 0.0, "planning": 0.0, "governance": 0.0}

    machine.transition(PipelineState.RETRIEVAL)
    t0 = time.perf_counter()
    q = decompose_query(r, d, agent)
    timings["retrieval"] += (time.perf_counter() - t0) * 1000.0
    caps = config.candidate_caps or (None,)

    best: tuple | None = None  # (objective, itinerary, trace, report, subset)
    rounds_used = 0
    for round_no in range(1 + max(0, config.recompute_rounds)):
        cap = caps[min(round_no, len(caps) - 1)]
        t0 = time.perf_counter()
        try:
            s = retrieve_subset(q, d, cap=cap, strict=True)
        except InfeasibleRetrieval:
            s = retrieve_subset(q, d, cap=cap, strict=False)
        timings["retrieval"] += (time.perf_counter() - t0) * 1000.0

        machine.transition(PipelineState.PLANNING)
        t0 = time.perf_counter()
        try:
            it = plan(q, s, agent, temperature=config.planning_temperature, on_step=on_step)
        except SkeletonInfeasible:
            it = _stub_itinerary(q)
        timings["planning"] += (time.perf_counter() - t0) * 1000.0

        machine.transition(PipelineState.GOVERNANCE)
        t0 = time.perf_counter()
        it, trace = govern(
            it,
            q,
            s,
            d,
            agent,
            max_iterations=config.max_governance_iterations,
            temperature=config.governance_temperature,
        )
        timings["governance"] += (time.perf_counter() - t0) * 1000.0

        report = check_all(it, q, s, d)
        score = objective(build_system_report(it, q, s, d))
        if best is None or score < best[0]:
            best = (score, it, trace, report, s)

        complete = report.result_for("complete_information")
        if complete is not None and complete.passed:
            break
        if round_no >= config.recompute_rounds:
            break
        rounds_used += 1

    machine.transition(PipelineState.DELIVERED)
    _, it, trace, report, s = best
    timings["total"] = sum(timings.values())
    return PlanOutcome(
        query=q,
        itinerary=it,
        trace=trace,
        final_report=report,
        subset=s,
        timings_ms=timings,
        agent_calls=agent.n_calls,
        recompute_rounds_used=rounds_used,
        state_history=tuple(state.value for state in machine.history),
    )
