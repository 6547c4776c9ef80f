"""Suggestion interface shared by all three pipeline stages.

Every stage asks the same question: given a serialized decision context and a
ranked candidate list, which candidate should we try first? The mock backend
answers deterministically (a pure function of role, context, candidates, and
seed); the remote backend forwards the question to an HTTP endpoint and falls
back to the mock on any failure, so a flaky endpoint can never sink a run.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from .errors import AgentContractError

ENV_URL = "TRIFLOW_AGENT_URL"
ENV_TOKEN = "TRIFLOW_AGENT_TOKEN"

RETRIEVAL_TEMPERATURE = 0.0
PLANNING_TEMPERATURE = 0.3
GOVERNANCE_TEMPERATURE = 0.6


@dataclass(frozen=True)
class StageRole:
    stage: str  # retrieval | planning | governance
    temperature: float


RETRIEVAL_ROLE = StageRole("retrieval", RETRIEVAL_TEMPERATURE)
PLANNING_ROLE = StageRole("planning", PLANNING_TEMPERATURE)
GOVERNANCE_ROLE = StageRole("governance", GOVERNANCE_TEMPERATURE)


def role_for_stage(stage: str, temperature: float | None = None) -> StageRole:
    defaults = {
        "retrieval": RETRIEVAL_TEMPERATURE,
        "planning": PLANNING_TEMPERATURE,
        "governance": GOVERNANCE_TEMPERATURE,
    }
    if stage not in defaults:
        raise ValueError(f"unknown stage {stage!r}")
    return StageRole(stage, defaults[stage] if temperature is None else temperature)


@dataclass(frozen=True)
class Suggestion:
    choice: str
    choice_index: int
    rationale: str
    confidence: float | None = None


def _window_size(temperature: float) -> int:
    # temperature maps onto how deep into the ranking the pick may wander
    if temperature < 0.15:
        return 1
    if temperature < 0.45:
        return 2
    return 3


def mock_suggest(role: StageRole, context: str, candidates: list[str], seed: int) -> Suggestion:
    """Pure deterministic suggestion: top-k window sized by temperature,
    uniform pick inside the window seeded by (seed, context digest)."""
    if not candidates:
        raise AgentContractError("suggest called with no candidates")
    k = min(_window_size(role.temperature), len(candidates))
    digest = hashlib.sha256(context.encode("utf-8")).hexdigest()
    rng = random.Random(f"{seed}:{digest}")
    index = rng.randrange(k) if k > 1 else 0
    return Suggestion(
        choice=candidates[index],
        choice_index=index,
        rationale=f"mock[{role.stage}]: rank {index} of top-{k}",
    )


class MockAgentBackend:
    name = "mock"

    def suggest(self, role: StageRole, context: str, candidates: list[str], seed: int) -> Suggestion:
        return mock_suggest(role, context, candidates, seed)


class RemoteAgentBackend:
    """HTTP backend speaking a one-endpoint JSON protocol.

    Request body: {role, temperature, context, candidates[]}; expected reply:
    {choice_index, rationale}. Endpoint and bearer token come from the
    TRIFLOW_AGENT_URL / TRIFLOW_AGENT_TOKEN environment variables unless
    given explicitly. Timeouts, transport errors, and malformed replies all
    fall back to the mock answer.
    """

    name = "remote"

    def __init__(
        self,
        url: str | None = None,
        token: str | None = None,
        deadline_s: float = 30.0,
        retries: int = 2,
    ):
        self.url = url if url is not None else os.environ.get(ENV_URL)
        self.token = token if token is not None else os.environ.get(ENV_TOKEN)
        self.deadline_s = deadline_s
        self.retries = retries
        self.fallbacks = 0

    def suggest(self, role: StageRole, context: str, candidates: list[str], seed: int) -> Suggestion:
        if not candidates:
            raise AgentContractError("suggest called with no candidates")
        if self.url:
            for _ in range(1 + self.retries):
                reply = self._call_once(role, context, candidates)
                if reply is not None:
                    return reply
        self.fallbacks += 1
        return mock_suggest(role, context, candidates, seed)

    def _call_once(self, role: StageRole, context: str, candidates: list[str]) -> Suggestion | None:
        body = json.dumps(
            {
                "role": role.stage,
                "temperature": role.temperature,
                "context": context,
                "candidates": list(candidates),
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        request = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(request, timeout=self.deadline_s) as response:
                payload = json.loads(response.read().decode("utf-8"))
            index = payload["choice_index"]
            if not isinstance(index, int) or not 0 <= index < len(candidates):
                return None
            return Suggestion(
                choice=candidates[index],
                choice_index=index,
                rationale=str(payload.get("rationale", "remote")),
            )
        except (urllib.error.URLError, OSError, ValueError, KeyError, TypeError):
            return None


@dataclass
class AgentHandle:
    """Per-run agent facade: owns the backend, the run seed, and the call counter."""

    backend: MockAgentBackend | RemoteAgentBackend = field(default_factory=MockAgentBackend)
    seed: int = 0
    n_calls: int = 0

    def suggest(self, role: StageRole, context: str, candidates: list[str]) -> Suggestion:
        self.n_calls += 1
        return self.backend.suggest(role, context, candidates, self.seed)


def make_agent(backend: str, seed: int) -> AgentHandle:
    if backend == "mock":
        return AgentHandle(backend=MockAgentBackend(), seed=seed)
    if backend == "remote":
        return AgentHandle(backend=RemoteAgentBackend(), seed=seed)
    raise ValueError(f"unknown agent backend {backend!r}")
