from __future__ import annotations

import json

import pytest

from plans import MICRO_DATES
from triflow.errors import IllegalTransition, RequestValidationError, SandboxIntegrityError
from triflow.orchestrator import (
    PipelineConfig,
    PipelineState,
    StateMachine,
    load_config,
    run_pipeline,
)
from triflow.planner import itinerary_to_json
from triflow.request import UserRequest
from triflow.sandbox import City, SandboxDataset


def _micro_request(**overrides) -> UserRequest:
    fields = dict(
        origin="Alpha",
        destination_cities=("Beta",),
        dates=MICRO_DATES,
        party_size=2,
        budget=10_000_000,
    )
    fields.update(overrides)
    return UserRequest(**fields)


# -- state machine ---------------------------------------------------------


def test_legal_walk_records_history():
    machine = StateMachine()
    for state in (
        PipelineState.RETRIEVAL,
        PipelineState.PLANNING,
        PipelineState.GOVERNANCE,
        PipelineState.PLANNING,
        PipelineState.GOVERNANCE,
        PipelineState.DELIVERED,
    ):
        machine.transition(state)
    assert machine.state is PipelineState.DELIVERED
    assert [s.value for s in machine.history] == [
        "Init", "Retrieval", "Planning", "Governance", "Planning", "Governance", "Delivered",
    ]


def test_illegal_transitions_raise():
    machine = StateMachine()
    with pytest.raises(IllegalTransition, match="Init -> Planning"):
        machine.transition(PipelineState.PLANNING)
    machine.transition(PipelineState.RETRIEVAL)
    machine.transition(PipelineState.PLANNING)
    machine.transition(PipelineState.GOVERNANCE)
    machine.transition(PipelineState.DELIVERED)
    with pytest.raises(IllegalTransition):
        machine.transition(PipelineState.PLANNING)  # terminal state


# -- configuration ---------------------------------------------------------


def test_config_defaults_pin_stage_temperatures():
    config = PipelineConfig()
    assert config.retrieval_temperature == 0.0
    assert config.planning_temperature == 0.3
    assert config.governance_temperature == 0.6
    assert config.max_governance_iterations == 8
    assert config.candidate_caps == (20, 50, None)
    assert config.recompute_rounds == 2
    assert config.agent_backend == "mock"
    assert config.seed == 0


def test_config_from_json_rejects_unknown_keys():
    with pytest.raises(RequestValidationError, match="unknown config keys"):
        PipelineConfig.from_json({"seed": 1, "warp_factor": 9})
    config = PipelineConfig.from_json({"seed": 3, "candidate_caps": [10, None]})
    assert config.seed == 3
    assert config.candidate_caps == (10, None)


def test_load_config_paths(tmp_path):
    good = tmp_path / "config.json"
    good.write_text(json.dumps({"seed": 5, "planning_temperature": 0.1}))
    config = load_config(good)
    assert config.seed == 5
    assert config.planning_temperature == 0.1

    bad = tmp_path / "broken.json"
    bad.write_text("{nope")
    with pytest.raises(RequestValidationError, match="invalid config JSON"):
        load_config(bad)

    listy = tmp_path / "list.json"
    listy.write_text("[1, 2]")
    with pytest.raises(RequestValidationError, match="must be a JSON object"):
        load_config(listy)


# -- full pipeline ---------------------------------------------------------


def test_pipeline_delivers_clean_plan_on_micro(micro_dataset):
    outcome = run_pipeline(_micro_request(), micro_dataset)
    assert outcome.state_history == ("Init", "Retrieval", "Planning", "Governance", "Delivered")
    assert outcome.final_report.all_passed, outcome.final_report.failing_names()
    assert outcome.recompute_rounds_used == 0
    assert outcome.agent_calls > 0
    assert set(outcome.timings_ms) == {"retrieval", "planning", "governance", "total"}
    parts = sum(v for k, v in outcome.timings_ms.items() if k != "total")
    assert outcome.timings_ms["total"] == pytest.approx(parts)
    assert len(outcome.itinerary.days) == 3


def test_pipeline_is_deterministic(micro_dataset):
    first = run_pipeline(_micro_request(), micro_dataset, PipelineConfig(seed=11))
    second = run_pipeline(_micro_request(), micro_dataset, PipelineConfig(seed=11))
    assert itinerary_to_json(first.itinerary) == itinerary_to_json(second.itinerary)
    assert first.state_history == second.state_history
    assert first.agent_calls == second.agent_calls


def test_pipeline_rejects_corrupt_dataset(micro_dataset):
    broken = SandboxDataset(
        cities=(City("Alpha", 95.0, -100.0),) + micro_dataset.cities[1:],
        flights=micro_dataset.flights,
        accommodations=micro_dataset.accommodations,
        restaurants=micro_dataset.restaurants,
        attractions=micro_dataset.attractions,
        distances=micro_dataset.distances,
    )
    with pytest.raises(SandboxIntegrityError, match="geometry"):
        run_pipeline(_micro_request(), broken)


def test_pipeline_survives_unreachable_destination(micro_dataset):
    stranded = SandboxDataset(
        cities=micro_dataset.cities,
        flights=(),
        accommodations=micro_dataset.accommodations,
        restaurants=micro_dataset.restaurants,
        attractions=micro_dataset.attractions,
        distances=(),
    )
    outcome = run_pipeline(_micro_request(), stranded)
    # no transport exists at all: delivery still happens, with the gap
    # reported honestly and every recompute round spent trying
    assert outcome.state_history[-1] == "Delivered"
    assert outcome.state_history.count("Planning") == 3
    assert outcome.recompute_rounds_used == 2
    complete = outcome.final_report.result_for("complete_information")
    assert complete is not None and not complete.passed
    assert all(day.city_or_transition == "Alpha" for day in outcome.itinerary.days)


def test_pipeline_forwards_planner_steps(micro_dataset):
    seen: list[str] = []
    run_pipeline(_micro_request(), micro_dataset, on_step=lambda slot, _it: seen.append(slot))
    assert seen[0].startswith("transport:")
    assert "commit:attractions" in seen


def test_outcome_repr_omits_subset(micro_dataset):
    outcome = run_pipeline(_micro_request(), micro_dataset)
    assert "subset=" not in repr(outcome)
