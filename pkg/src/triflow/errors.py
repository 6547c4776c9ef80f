"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class TriflowError(Exception):
    """Base class for all engine errors."""


class SandboxParseError(TriflowError):
    """A sandbox table file is malformed; message names file and line."""


class ReferentialIntegrityError(TriflowError):
    """A record references a city that does not exist in the dataset."""


class SandboxIntegrityError(TriflowError):
    """A dataset failed integrity validation before a pipeline run."""


class RequestValidationError(TriflowError):
    """A user request violates a structural rule (dates, party size, ...)."""


class CityResolutionError(RequestValidationError):
    """A requested city name does not resolve in the sandbox."""

    def __init__(self, name: str, candidates: list[str]):
        self.name = name
        self.candidates = candidates
        hint = f" (closest: {', '.join(candidates)})" if candidates else ""
        super().__init__(f"unknown city {name!r}{hint}")


class InfeasibleRetrieval(TriflowError):
    """A mandatory slot class has an empty candidate pool."""

    def __init__(self, slot_class: str):
        self.slot_class = slot_class
        super().__init__(f"empty candidate pool for mandatory slot class {slot_class!r}")


class ProvenanceError(TriflowError):
    """A retrieved record does not exist verbatim in the source dataset."""


class ApplicabilityError(TriflowError):
    """A constraint checker was invoked for a query it does not apply to."""


class DanglingReferenceError(TriflowError):
    """An itinerary slot references a record missing from the subset."""


class SkeletonInfeasible(TriflowError):
    """No city ordering has transport coverage for every leg."""


class SlotInfeasible(TriflowError):
    """Every candidate for a slot failed validation."""

    def __init__(self, slot: object):
        self.slot = slot
        super().__init__(f"no valid candidate for slot {slot}")


class LedgerRegression(TriflowError):
    """A fill step broke a constraint already committed to the ledger."""


class AgentContractError(TriflowError):
    """The agent interface was called with an empty candidate list."""


class IllegalTransition(TriflowError):
    """The pipeline state machine was asked to make a forbidden move."""
