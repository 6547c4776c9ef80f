"""Feasibility-first trip planning over sandboxed travel data."""

from __future__ import annotations

from .agent import AgentHandle, MockAgentBackend, RemoteAgentBackend, make_agent, mock_suggest
from .constraints import (
    COMMONSENSE,
    HARD,
    ConstraintId,
    ConstraintReport,
    CostBreakdown,
    Violation,
    applicable_ids,
    check,
    check_all,
    compute_cost,
    constraint_ids,
    is_applicable,
    register_checker,
)
from .errors import TriflowError
from .governance import GovernanceTrace, SystemReport, build_system_report, govern, objective
from .metrics import BenchmarkReport, evaluate, render_csv, render_text
from .orchestrator import PipelineConfig, PipelineState, PlanOutcome, load_config, run_pipeline
from .planner import DayPlan, Itinerary, Skeleton, build_skeleton, itinerary_to_json, plan
from .request import (
    HardConstraintSet,
    StructuredQuery,
    UserRequest,
    decompose_query,
    load_requests,
    request_from_json,
    request_to_json,
)
from .retrieval import RetrievedSubset, retrieve_subset
from .sandbox import (
    GeneratorParams,
    SandboxDataset,
    generate_synthetic,
    load_sandbox,
    validate_integrity,
    write_sandbox,
)
from .benchmark import run_batch, synthesize_requests, write_requests

__version__ = "0.1.0"

__all__ = [
    "AgentHandle",
    "BenchmarkReport",
    "COMMONSENSE",
    "ConstraintId",
    "ConstraintReport",
    "CostBreakdown",
    "DayPlan",
    "GeneratorParams",
    "GovernanceTrace",
    "HARD",
    "HardConstraintSet",
    "Itinerary",
    "MockAgentBackend",
    "PipelineConfig",
    "PipelineState",
    "PlanOutcome",
    "RemoteAgentBackend",
    "RetrievedSubset",
    "SandboxDataset",
    "Skeleton",
    "StructuredQuery",
    "SystemReport",
    "TriflowError",
    "UserRequest",
    "Violation",
    "applicable_ids",
    "build_skeleton",
    "build_system_report",
    "check",
    "check_all",
    "compute_cost",
    "constraint_ids",
    "decompose_query",
    "evaluate",
    "generate_synthetic",
    "govern",
    "is_applicable",
    "itinerary_to_json",
    "load_config",
    "load_requests",
    "load_sandbox",
    "make_agent",
    "mock_suggest",
    "objective",
    "plan",
    "register_checker",
    "render_csv",
    "render_text",
    "request_from_json",
    "request_to_json",
    "retrieve_subset",
    "run_batch",
    "run_pipeline",
    "synthesize_requests",
    "validate_integrity",
    "write_requests",
    "write_sandbox",
]
