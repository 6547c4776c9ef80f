"""User requests and their decomposition into the structured query that
drives retrieval.

A request arrives either fully structured or with an extra free-text blurb.
Decomposition canonicalizes city names against the sandbox, normalizes
preference tags, and derives the day/transition counts. Free text only ever
contributes preference tags; structured fields always win.
"""

from __future__ import annotations

import difflib
import json
import re
from dataclasses import dataclass
from datetime import date, timedelta
from typing import TYPE_CHECKING

from .errors import CityResolutionError, RequestValidationError
from .sandbox import ROOM_TYPES, SandboxDataset

if TYPE_CHECKING:
    from .agent import AgentHandle

ROOM_RULE_NEEDS = ("smoking", "parties", "children_under_10", "pets", "visitors")
TRANSPORT_MODES = ("flight", "taxi", "self_drive")
BANNABLE_MODES = ("flight", "self_drive")
ALLOWED_DAY_COUNTS = (3, 5, 7)

# tokens dropped when mining free text for preference tags
_STOPWORDS = frozenset(
    "a an and are at be for from go i in is it like love my of on or our"
    " please really see some the to trip view visit want we with would".split()
)


@dataclass(frozen=True)
class HardConstraintSet:
    """User-imposed requirements checked by the hard constraint family."""

    room_rule_needs: frozenset[str] = frozenset()
    room_type: str | None = None
    cuisines: frozenset[str] = frozenset()
    transport_bans: frozenset[str] = frozenset()

    def validate(self) -> None:
        bad = self.room_rule_needs - set(ROOM_RULE_NEEDS)
        if bad:
            raise RequestValidationError(f"unknown room rule needs: {sorted(bad)}")
        if self.room_type is not None and self.room_type not in ROOM_TYPES:
            raise RequestValidationError(
                f"unknown room_type {self.room_type!r}; expected one of {ROOM_TYPES}"
            )
        bad = self.transport_bans - set(BANNABLE_MODES)
        if bad:
            raise RequestValidationError(f"unknown transport bans: {sorted(bad)}")
        for cuisine in self.cuisines:
            if not cuisine or cuisine != cuisine.strip().lower():
                raise RequestValidationError(f"cuisine tags must be lowercase: {cuisine!r}")


@dataclass(frozen=True)
class UserRequest:
    origin: str
    destination_cities: tuple[str, ...]
    dates: tuple[date, ...]
    party_size: int
    budget: int
    hard: HardConstraintSet = HardConstraintSet()
    preferences: tuple[str, ...] = ()
    raw_text: str | None = None


@dataclass(frozen=True)
class StructuredQuery:
    """Normalized request: the contract every later stage works against."""

    origin: str
    destination_cities: tuple[str, ...]
    dates: tuple[date, ...]
    party_size: int
    budget: int
    hard: HardConstraintSet
    preferences: tuple[str, ...]
    days: int
    n_city_transitions: int

    @property
    def tier(self) -> str:
        return {3: "easy", 5: "medium", 7: "hard"}[self.days]

    def city_set(self) -> frozenset[str]:
        return frozenset(self.destination_cities) | {self.origin}

    def as_request(self) -> UserRequest:
        return UserRequest(
            origin=self.origin,
            destination_cities=self.destination_cities,
            dates=self.dates,
            party_size=self.party_size,
            budget=self.budget,
            hard=self.hard,
            preferences=self.preferences,
            raw_text=None,
        )


def _canon_key(name: str) -> str:
    return re.sub(r"\s+", "", name).lower()


def resolve_city(name: str, d: SandboxDataset) -> str:
    """Match ``name`` to a sandbox city, ignoring case and whitespace."""
    table = {_canon_key(c.name): c.name for c in d.cities}
    key = _canon_key(name)
    if key in table:
        return table[key]
    candidates = difflib.get_close_matches(key, sorted(table), n=3, cutoff=0.5)
    raise CityResolutionError(name, [table[c] for c in candidates])


def _extract_tags(raw_text: str) -> list[str]:
    tags = []
    for token in re.findall(r"[a-z0-9_]+", raw_text.lower()):
        if token not in _STOPWORDS and not token.isdigit() and token not in tags:
            tags.append(token)
    return tags


def decompose_query(
    r: UserRequest, d: SandboxDataset, agent: AgentHandle | None = None
) -> StructuredQuery:
    """Turn a request into a normalized StructuredQuery against sandbox ``d``.

    Raises CityResolutionError for unresolvable city names and
    RequestValidationError for inconsistent dates, party size, or budget.
    The agent hook only ever adds preference tags mined from raw_text;
    structured fields take precedence and are never overridden.
    """
    if not r.destination_cities:
        raise RequestValidationError("at least one destination city is required")
    if len(r.destination_cities) > 3:
        raise RequestValidationError("at most 3 destination cities are supported")
    if len(r.dates) not in ALLOWED_DAY_COUNTS:
        raise RequestValidationError(
            f"trip length must be one of {ALLOWED_DAY_COUNTS} days, got {len(r.dates)}"
        )
    for prev, cur in zip(r.dates, r.dates[1:]):
        if cur - prev != timedelta(days=1):
            raise RequestValidationError(f"dates not consecutive at {prev} -> {cur}")
    if r.party_size < 1:
        raise RequestValidationError("party_size must be >= 1")
    if r.budget < 0:
        raise RequestValidationError("budget must be >= 0")
    r.hard.validate()

    origin = resolve_city(r.origin, d)
    destinations = tuple(resolve_city(c, d) for c in r.destination_cities)
    if len(set(destinations)) != len(destinations):
        raise RequestValidationError("destination cities must be distinct")
    if origin in destinations:
        raise RequestValidationError("origin cannot also be a destination")

    preferences: list[str] = []
    for tag in r.preferences:
        normalized = tag.strip().lower()
        if normalized and normalized not in preferences:
            preferences.append(normalized)
    if r.raw_text:
        # structured preferences stay in front; mined tags only append
        for tag in _extract_tags(r.raw_text):
            if tag not in preferences:
                preferences.append(tag)

    return StructuredQuery(
        origin=origin,
        destination_cities=destinations,
        dates=tuple(r.dates),
        party_size=r.party_size,
        budget=r.budget,
        hard=r.hard,
        preferences=tuple(preferences),
        days=len(r.dates),
        n_city_transitions=len(destinations) + 1,
    )


# --------------------------------------------------------------------------
# JSON-lines batch format


def request_from_json(obj: dict) -> UserRequest:
    """Build a UserRequest from one parsed JSON object (one batch line)."""
    try:
        hard_obj = obj.get("hard") or {}
        hard = HardConstraintSet(
            room_rule_needs=frozenset(hard_obj.get("room_rule_needs") or ()),
            room_type=hard_obj.get("room_type"),
            cuisines=frozenset(hard_obj.get("cuisines") or ()),
            transport_bans=frozenset(hard_obj.get("transport_bans") or ()),
        )
        return UserRequest(
            origin=obj["origin"],
            destination_cities=tuple(obj["destination_cities"]),
            dates=tuple(date.fromisoformat(s) for s in obj["dates"]),
            party_size=int(obj["party_size"]),
            budget=int(obj["budget"]),
            hard=hard,
            preferences=tuple(obj.get("preferences") or ()),
            raw_text=obj.get("raw_text"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RequestValidationError(f"malformed request object: {exc}") from exc


def request_to_json(r: UserRequest) -> dict:
    return {
        "origin": r.origin,
        "destination_cities": list(r.destination_cities),
        "dates": [d.isoformat() for d in r.dates],
        "party_size": r.party_size,
        "budget": r.budget,
        "hard": {
            "room_rule_needs": sorted(r.hard.room_rule_needs),
            "room_type": r.hard.room_type,
            "cuisines": sorted(r.hard.cuisines),
            "transport_bans": sorted(r.hard.transport_bans),
        },
        "preferences": list(r.preferences),
        "raw_text": r.raw_text,
    }


def load_requests(path) -> list[UserRequest]:
    """Read a JSON-lines batch file; blank lines are skipped."""
    requests = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RequestValidationError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise RequestValidationError(f"{path}:{line_no}: expected a JSON object")
            requests.append(request_from_json(obj))
    return requests
