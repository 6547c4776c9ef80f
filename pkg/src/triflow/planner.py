"""Coarse-to-fine itinerary assembly under monotonic feasibility.

The planner first fixes the trip skeleton (city order and nights), then fills
slots in a fixed order: transport legs, accommodations, meals in day order,
attractions in day order. Every fill runs a suggest-validate-normalize loop:
the agent proposes from an arbitration-ranked candidate list, a validator
re-checks everything the commitment ledger has frozen plus the slot's own
rules, and only a passing choice lands. Once a phase finishes, the
constraints it established are appended to the ledger and no later step may
break them; the planner re-asserts this after every single fill.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field, replace
from datetime import date as Date
from typing import Callable

from .agent import AgentHandle, StageRole, role_for_stage
from .constraints import (
    COMMONSENSE,
    HARD,
    MEAL_SLOTS,
    VEHICLE_CAPACITY,
    check,
    constraint_id,
    day_cities,
    is_applicable,
    is_transition,
)
from .errors import LedgerRegression, SkeletonInfeasible, SlotInfeasible
from .request import StructuredQuery, request_to_json
from .retrieval import RetrievedSubset
from .sandbox import Accommodation, Attraction, Flight, Restaurant

ALIGNMENT_WEIGHT = 0.7
EFFICIENCY_WEIGHT = 0.3
MAX_AGENT_ROUNDS = 3
# ranking distance for a leg with no distance entry (flight-only coverage)
MISSING_LEG_PENALTY = 10.0


@dataclass(frozen=True)
class PlaceRef:
    name: str
    city: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.name, self.city)

    def __str__(self) -> str:
        return f"{self.name}, {self.city}"


@dataclass(frozen=True)
class TransportLeg:
    mode: str  # flight | taxi | self_drive
    origin: str
    destination: str
    flight_id: str | None = None
    cost: int = 0

    @property
    def ref(self) -> str:
        return self.flight_id if self.mode == "flight" else f"{self.origin} -> {self.destination}"


@dataclass(frozen=True)
class DayPlan:
    day_index: int
    date: Date
    city_or_transition: str | tuple[str, str]
    transport: TransportLeg | None = None
    breakfast: PlaceRef | None = None
    lunch: PlaceRef | None = None
    dinner: PlaceRef | None = None
    attractions: tuple[PlaceRef, ...] = ()
    accommodation: PlaceRef | None = None


@dataclass(frozen=True)
class LedgerEntry:
    kind: str  # structural | constraint | slot
    key: str
    committed_at: str
    frozen_fields: tuple[str, ...] = ()


class CommitmentLedger:
    """Append-only record of structural decisions and satisfied constraints."""

    def __init__(self):
        self._entries: list[LedgerEntry] = []

    def append(self, entry: LedgerEntry) -> None:
        self._entries.append(entry)

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    def committed_constraints(self) -> tuple[str, ...]:
        seen: list[str] = []
        for entry in self._entries:
            if entry.kind == "constraint" and entry.key not in seen:
                seen.append(entry.key)
        return tuple(seen)

    def frozen_fields(self) -> frozenset[str]:
        return frozenset(f for e in self._entries for f in e.frozen_fields)


@dataclass(frozen=True)
class Skeleton:
    city_order: tuple[str, ...]  # origin, destinations in visit order, origin
    day_assignments: tuple[str | tuple[str, str], ...]
    nights_per_city: tuple[tuple[str, int], ...]

    def nights_for(self, city: str) -> int:
        for name, nights in self.nights_per_city:
            if name == city:
                return nights
        return 0


@dataclass(frozen=True)
class Itinerary:
    days: tuple[DayPlan, ...]
    ledger: CommitmentLedger = field(compare=False, repr=False)

    def day(self, index: int) -> DayPlan:
        return self.days[index]

    def with_day(self, index: int, new_day: DayPlan) -> Itinerary:
        days = tuple(new_day if d.day_index == index else d for d in self.days)
        return Itinerary(days=days, ledger=self.ledger)

    def used_restaurant_keys(self) -> set[tuple[str, str]]:
        used = set()
        for day in self.days:
            for slot in MEAL_SLOTS:
                ref = getattr(day, slot)
                if ref is not None:
                    used.add(ref.key)
        return used

    def used_attraction_keys(self) -> set[tuple[str, str]]:
        return {ref.key for day in self.days for ref in day.attractions}


def query_fingerprint(q: StructuredQuery) -> str:
    return json.dumps(request_to_json(q.as_request()), sort_keys=True, separators=(",", ":"))


# --------------------------------------------------------------------------
# Arbitration


@dataclass(frozen=True)
class ScoredCandidate:
    key: str
    payload: object
    alignment: float
    efficiency: float

    @property
    def combined(self) -> float:
        return ALIGNMENT_WEIGHT * self.alignment + EFFICIENCY_WEIGHT * self.efficiency


def _tokens(text: str) -> frozenset[str]:
    return frozenset(re.findall(r"[a-z0-9]+", text.lower()))


def item_tags(record) -> frozenset[str]:
    if isinstance(record, Restaurant):
        return record.cuisines | _tokens(record.name)
    if isinstance(record, Accommodation):
        return frozenset({record.room_type}) | record.house_rules | _tokens(record.name)
    if isinstance(record, Attraction):
        return _tokens(record.name)
    return frozenset()


def alignment_score(tags: frozenset[str], q: StructuredQuery) -> float:
    if not q.preferences:
        return 0.0
    prefs = set(q.preferences)
    return len(tags & prefs) / len(prefs)


def rank_candidates(entries: list[tuple[str, object, frozenset[str], int]], q: StructuredQuery) -> list[ScoredCandidate]:
    """Score (key, payload, tags, cost) entries and rank them: combined score
    descending, name ascending. Efficiency is min-max normalized inverse cost
    within this pool, so uniform price scaling never changes the order."""
    if not entries:
        return []
    costs = [cost for _, _, _, cost in entries]
    lo, hi = min(costs), max(costs)
    scored = [
        ScoredCandidate(
            key=key,
            payload=payload,
            alignment=alignment_score(tags, q),
            efficiency=1.0 if hi == lo else (hi - cost) / (hi - lo),
        )
        for key, payload, tags, cost in entries
    ]
    scored.sort(key=lambda c: (-c.combined, c.key))
    return scored


# --------------------------------------------------------------------------
# Skeleton


def _allocate_nights(n_nights: int, n_cities: int) -> list[int]:
    base, rem = divmod(n_nights, n_cities)
    # remainder goes to the later cities
    return [base + (1 if i >= n_cities - rem else 0) for i in range(n_cities)]


def _assignments_for(ordering: tuple[str, ...], nights: list[int], q: StructuredQuery):
    assignments: list[str | tuple[str, str]] = []
    prev = q.origin
    for city, n in zip(ordering, nights):
        assignments.append((prev, city))
        assignments.extend([city] * (n - 1))
        prev = city
    assignments.append((prev, q.origin))
    return tuple(assignments)


def _transition_legs(assignments, dates):
    legs = []
    for index, assignment in enumerate(assignments):
        if isinstance(assignment, tuple):
            legs.append((assignment[0], assignment[1], dates[index]))
    return legs


def _leg_feasible(a: str, b: str, day: Date, s: RetrievedSubset) -> bool:
    if (a, b) in s.ground_by_leg:
        return True
    return "flight" in s.allowed_modes and bool(s.flights_by_leg.get((a, b, day)))


def _ordering_distance(legs, s: RetrievedSubset) -> float:
    known = [entry.distance_km for entry in s.ground_by_leg.values()]
    penalty = (max(known) if known else 1.0) * MISSING_LEG_PENALTY
    total = 0.0
    for a, b, _ in legs:
        entry = s.ground_by_leg.get((a, b))
        total += entry.distance_km if entry is not None else penalty
    return total


def build_skeleton(q: StructuredQuery, s: RetrievedSubset, agent: AgentHandle,
                   temperature: float | None = None) -> Skeleton:
    """Fix city order and nights. Nights spread as evenly as possible with
    the remainder on later cities; among transport-feasible orderings the
    minimum total ground distance wins, ties broken lexicographically with
    the agent choosing inside the tie set only."""
    k = len(q.destination_cities)
    if q.days - 1 < k:
        raise SkeletonInfeasible(
            f"{q.days}-day trip cannot give each of {k} destinations a night"
        )
    nights = _allocate_nights(q.days - 1, k)

    feasible: list[tuple[float, tuple[str, ...]]] = []
    for ordering in itertools.permutations(q.destination_cities):
        assignments = _assignments_for(ordering, nights, q)
        legs = _transition_legs(assignments, q.dates)
        if all(_leg_feasible(a, b, day, s) for a, b, day in legs):
            feasible.append((_ordering_distance(legs, s), ordering))
    if not feasible:
        raise SkeletonInfeasible("no city ordering has transport coverage on every leg")

    best_distance = min(distance for distance, _ in feasible)
    tie_set = sorted(ordering for distance, ordering in feasible if distance == best_distance)
    if len(tie_set) == 1:
        ordering = tie_set[0]
    else:
        role = role_for_stage("planning", temperature)
        labels = [" > ".join(o) for o in tie_set]
        context = f"{query_fingerprint(q)}|skeleton|{labels}"
        ordering = tie_set[agent.suggest(role, context, labels).choice_index]

    return Skeleton(
        city_order=(q.origin, *ordering, q.origin),
        day_assignments=_assignments_for(ordering, nights, q),
        nights_per_city=tuple(zip(ordering, nights)),
    )


# --------------------------------------------------------------------------
# Candidate pools (shared with governance)


def transport_candidates(day: DayPlan, q: StructuredQuery, s: RetrievedSubset) -> list[ScoredCandidate]:
    if not is_transition(day):
        return []
    a, b = day_cities(day)
    party = q.party_size
    entries: list[tuple[str, object, frozenset[str], int]] = []
    if "flight" in s.allowed_modes:
        for f in s.flights_by_leg.get((a, b, day.date), ()):
            leg = TransportLeg("flight", a, b, flight_id=f.id, cost=f.price * party)
            entries.append((f"flight {f.id}", leg, frozenset(), leg.cost))
    ground = s.ground_by_leg.get((a, b))
    if ground is not None:
        if "taxi" in s.allowed_modes:
            leg = TransportLeg("taxi", a, b, cost=ground.taxi_cost * party)
            entries.append(("taxi", leg, frozenset(), leg.cost))
        if "self_drive" in s.allowed_modes:
            cost = ground.self_drive_cost * -(-party // VEHICLE_CAPACITY)
            leg = TransportLeg("self_drive", a, b, cost=cost)
            entries.append(("self_drive", leg, frozenset(), cost))
    return rank_candidates(entries, q)


def transport_profile(it: Itinerary, q: StructuredQuery, s: RetrievedSubset) -> frozenset[str]:
    """Pick a coherent mode set for the whole trip: flights-plus-taxi or
    ground-only. Per-leg greedy choice can mix flight with self_drive, which
    the conflict check forbids, so the profile is decided up front by
    comparing trip totals under each restriction."""
    flightful_total = 0
    ground_total = 0
    ground_possible = True
    for day in it.days:
        if not is_transition(day):
            continue
        costs_by_mode: dict[str, int] = {}
        for c in transport_candidates(day, q, s):
            mode = c.payload.mode
            if mode not in costs_by_mode or c.payload.cost < costs_by_mode[mode]:
                costs_by_mode[mode] = c.payload.cost
        if not costs_by_mode:
            continue
        fly = [costs_by_mode[m] for m in ("flight", "taxi") if m in costs_by_mode]
        gnd = [costs_by_mode[m] for m in ("taxi", "self_drive") if m in costs_by_mode]
        if fly:
            flightful_total += min(fly)
        if gnd:
            ground_total += min(gnd)
        else:
            ground_possible = False
    if not ground_possible or flightful_total < ground_total:
        return frozenset({"flight", "taxi"})
    return frozenset({"taxi", "self_drive"})


def accommodation_candidates(city: str, run_nights: int, q: StructuredQuery,
                             s: RetrievedSubset) -> list[ScoredCandidate]:
    party = q.party_size
    entries = []
    for a in s.accommodations_by_city.get(city, ()):
        if a.minimum_nights > run_nights:
            continue
        rooms = -(-party // a.max_occupancy)
        entries.append((a.name, a, item_tags(a), a.price_per_night * rooms))
    return rank_candidates(entries, q)


def meal_candidates(day: DayPlan, q: StructuredQuery, s: RetrievedSubset,
                    exclude: set[tuple[str, str]], missing_cuisines: frozenset[str] = frozenset()) -> list[ScoredCandidate]:
    entries = []
    for city in day_cities(day):
        for r in s.restaurants_by_city.get(city, ()):
            if (r.name, r.city) in exclude:
                continue
            entries.append((f"{r.name}, {r.city}", r, item_tags(r), r.avg_cost * q.party_size))
    ranked = rank_candidates(entries, q)
    if missing_cuisines:
        # feasibility-first nudge: restaurants that close a cuisine gap jump
        # the queue, keeping their arbitration order within each partition
        serving = [c for c in ranked if c.payload.cuisines & missing_cuisines]
        rest = [c for c in ranked if not (c.payload.cuisines & missing_cuisines)]
        ranked = serving + rest
    return ranked


def attraction_candidates(day: DayPlan, q: StructuredQuery, s: RetrievedSubset,
                          exclude: set[tuple[str, str]]) -> list[ScoredCandidate]:
    entries = []
    for city in day_cities(day):
        for a in s.attractions_by_city.get(city, ()):
            if (a.name, a.city) in exclude:
                continue
            entries.append((f"{a.name}, {a.city}", a, item_tags(a), 0))
    return rank_candidates(entries, q)


# --------------------------------------------------------------------------
# Slot filling


def _apply_choice(it: Itinerary, slot: str, payload: object) -> Itinerary:
    kind, _, rest = slot.partition(":")
    if kind == "transport":
        index = int(rest)
        return it.with_day(index, replace(it.day(index), transport=payload))
    if kind == "stay":
        record: Accommodation = payload  # type: ignore[assignment]
        ref = PlaceRef(record.name, record.city)
        indices = [int(p) for p in rest.split(",")]
        out = it
        for index in indices:
            out = out.with_day(index, replace(out.day(index), accommodation=ref))
        return out
    if kind in MEAL_SLOTS:
        index = int(rest)
        record = payload
        ref = PlaceRef(record.name, record.city)
        return it.with_day(index, replace(it.day(index), **{kind: ref}))
    if kind == "attraction":
        index = int(rest)
        record = payload
        ref = PlaceRef(record.name, record.city)
        day = it.day(index)
        return it.with_day(index, replace(day, attractions=day.attractions + (ref,)))
    raise ValueError(f"unknown slot id {slot!r}")


def apply_choice(it: Itinerary, slot: str, payload: object) -> Itinerary:
    """Public slot application used by the repair stage; never touches the ledger."""
    return _apply_choice(it, slot, payload)


def _validate(it: Itinerary, q: StructuredQuery, s: RetrievedSubset, names) -> bool:
    d = s.source
    for name in names:
        id = constraint_id(name)
        if not is_applicable(id, q):
            continue
        if not check(id, it, q, s, d).passed:
            return False
    return True


def assert_ledger(it: Itinerary, q: StructuredQuery, s: RetrievedSubset) -> None:
    """Replay every ledgered constraint; a failure means a later step broke
    an earlier commitment, which the planner must never allow."""
    d = s.source
    for name in it.ledger.committed_constraints():
        id = constraint_id(name)
        if not is_applicable(id, q):
            continue
        result = check(id, it, q, s, d)
        if not result.passed:
            raise LedgerRegression(
                f"committed constraint {name!r} regressed: {result.violations[0].message}"
            )


def fill_slot(
    it: Itinerary,
    slot: str,
    candidates: list[ScoredCandidate],
    validator: tuple[str, ...],
    agent: AgentHandle,
    q: StructuredQuery,
    s: RetrievedSubset,
    temperature: float | None = None,
    phase: str = "planning",
) -> Itinerary:
    """One suggest-validate-normalize loop: at most MAX_AGENT_ROUNDS agent
    suggestions, each validated against the ledger plus slot-local rules;
    rejected suggestions leave the pool; then a deterministic sweep of the
    remaining ranking. Raises SlotInfeasible when nothing validates."""
    if not candidates:
        raise SlotInfeasible(slot)
    validator_names = tuple(dict.fromkeys((*it.ledger.committed_constraints(), *validator)))
    role = role_for_stage("planning", temperature)
    fingerprint = query_fingerprint(q)
    remaining = list(candidates)

    for round_no in range(MAX_AGENT_ROUNDS):
        if not remaining:
            raise SlotInfeasible(slot)
        labels = [c.key for c in remaining]
        context = f"{fingerprint}|{slot}|round{round_no}|{json.dumps(labels)}"
        pick = remaining[agent.suggest(role, context, labels).choice_index]
        trial = _apply_choice(it, slot, pick.payload)
        if _validate(trial, q, s, validator_names):
            trial.ledger.append(LedgerEntry("slot", slot, phase))
            return trial
        remaining.remove(pick)

    for pick in remaining:
        trial = _apply_choice(it, slot, pick.payload)
        if _validate(trial, q, s, validator_names):
            trial.ledger.append(LedgerEntry("slot", slot, phase))
            return trial
    raise SlotInfeasible(slot)


# --------------------------------------------------------------------------
# Full planning pass


def _commit_if_passing(it: Itinerary, q: StructuredQuery, s: RetrievedSubset,
                       names: tuple[str, ...], phase: str) -> None:
    d = s.source
    committed = set(it.ledger.committed_constraints())
    for name in names:
        if name in committed:
            continue
        id = constraint_id(name)
        if not is_applicable(id, q):
            continue
        if check(id, it, q, s, d).passed:
            it.ledger.append(LedgerEntry("constraint", name, phase))


def plan(
    q: StructuredQuery,
    s: RetrievedSubset,
    agent: AgentHandle,
    temperature: float | None = None,
    on_step: Callable[[str, Itinerary], None] | None = None,
) -> Itinerary:
    """Assemble the full itinerary: skeleton, then transport, lodging, meals,
    attractions, committing each phase's constraints to the ledger as it
    lands. SlotInfeasible gaps are tolerated (the day keeps an empty slot
    and completeness reports it); SkeletonInfeasible propagates."""
    skeleton = build_skeleton(q, s, agent, temperature)
    ledger = CommitmentLedger()
    ledger.append(
        LedgerEntry(
            "structural",
            "skeleton",
            "skeleton",
            frozen_fields=("city_order", "day_assignments", "nights_per_city"),
        )
    )
    it = Itinerary(
        days=tuple(
            DayPlan(day_index=i, date=q.dates[i], city_or_transition=skeleton.day_assignments[i])
            for i in range(q.days)
        ),
        ledger=ledger,
    )

    def step(slot: str, current: Itinerary) -> None:
        assert_ledger(current, q, s)
        if on_step is not None:
            on_step(slot, current)

    def try_fill(current: Itinerary, slot: str, candidates, validator, phase: str) -> Itinerary:
        try:
            current = fill_slot(current, slot, candidates, validator, agent, q, s,
                                temperature=temperature, phase=phase)
            step(slot, current)
        except SlotInfeasible:
            pass  # leave the gap; completeness will report it
        return current

    # transport legs, chronological, restricted to one coherent mode profile
    slot_validators = ("within_sandbox", "reasonable_city_route",
                       "non_conflicting_transportation", "transportation")
    profile = transport_profile(it, q, s)
    for day in it.days:
        if is_transition(day):
            candidates = transport_candidates(day, q, s)
            narrowed = [c for c in candidates if c.payload.mode in profile]
            it = try_fill(it, f"transport:{day.day_index}", narrowed or candidates,
                          slot_validators, "transport")
    _commit_if_passing(it, q, s, ("within_sandbox", "reasonable_city_route",
                                  "non_conflicting_transportation", "transportation"), "transport")
    step("commit:transport", it)

    # one accommodation per contiguous stay
    stay_validators = ("within_sandbox", "within_current_city", "minimum_nights_stay",
                       "room_rule", "room_type")
    night_index = 0
    for city, nights in skeleton.nights_per_city:
        indices = list(range(night_index, night_index + nights))
        night_index += nights
        slot = "stay:" + ",".join(str(i) for i in indices)
        it = try_fill(it, slot, accommodation_candidates(city, nights, q, s),
                      stay_validators, "accommodations")
    _commit_if_passing(it, q, s, ("within_current_city", "minimum_nights_stay",
                                  "room_rule", "room_type"), "accommodations")
    step("commit:accommodations", it)

    # meals, chronological
    meal_validators = ("within_sandbox", "within_current_city", "diverse_restaurants")
    for day in it.days:
        for slot_name in MEAL_SLOTS:
            served: set[str] = set()
            for _day in it.days:
                for m in MEAL_SLOTS:
                    ref = getattr(_day, m)
                    if ref is not None:
                        record = s.find_restaurant(ref.name, ref.city)
                        if record is not None:
                            served |= record.cuisines
            missing = frozenset(q.hard.cuisines) - served
            candidates = meal_candidates(day, q, s, it.used_restaurant_keys(), missing)
            it = try_fill(it, f"{slot_name}:{day.day_index}", candidates,
                          meal_validators, "meals")
    _commit_if_passing(it, q, s, ("diverse_restaurants", "cuisine"), "meals")
    step("commit:meals", it)

    # one attraction per day, chronological
    attraction_validators = ("within_sandbox", "within_current_city", "diverse_attractions")
    for day in it.days:
        candidates = attraction_candidates(day, q, s, it.used_attraction_keys())
        it = try_fill(it, f"attraction:{day.day_index}", candidates,
                      attraction_validators, "attractions")
    _commit_if_passing(it, q, s, ("diverse_attractions", "complete_information"), "attractions")
    step("commit:attractions", it)

    return it


# --------------------------------------------------------------------------
# Harness plan format


def _encode_ref(ref: PlaceRef | None) -> str:
    return str(ref) if ref is not None else "-"


def itinerary_to_json(it: Itinerary) -> list[dict]:
    """One object per day; empty slots are encoded as "-"."""
    out = []
    for day in it.days:
        cities = day_cities(day)
        if day.transport is None:
            transport = "-"
        else:
            transport = {
                "mode": day.transport.mode,
                "ref": day.transport.ref,
                "cost": day.transport.cost,
            }
        out.append(
            {
                "day_index": day.day_index,
                "date": day.date.isoformat(),
                "city_or_transition": cities[0] if len(cities) == 1 else f"{cities[0]} -> {cities[1]}",
                "transport": transport,
                "breakfast": _encode_ref(day.breakfast),
                "lunch": _encode_ref(day.lunch),
                "dinner": _encode_ref(day.dinner),
                "attractions": [str(ref) for ref in day.attractions] if day.attractions else "-",
                "accommodation": _encode_ref(day.accommodation),
            }
        )
    return out
