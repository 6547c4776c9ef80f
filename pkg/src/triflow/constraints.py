"""The constraint registry: one pluggable checker per feasibility rule, plus
the cost model they share.

Eight commonsense checkers guard structural validity of any itinerary; five
hard checkers enforce what the user explicitly asked for. Checkers are pure
functions over (itinerary, query, subset, dataset) and report located
violations instead of raising, so every stage can ask "what is wrong" and
get the same answer. Registry order is the canonical report order.

Reference resolution is two-tiered: the retrieved subset first, the full
dataset second. A reference that resolves nowhere is the within-sandbox
checker's problem; other checkers skip what they cannot resolve rather than
double-reporting it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

from .errors import ApplicabilityError, DanglingReferenceError
from .request import StructuredQuery
from .retrieval import RetrievedSubset
from .sandbox import SandboxDataset

if TYPE_CHECKING:
    from .planner import DayPlan, Itinerary, TransportLeg

VEHICLE_CAPACITY = 5

COMMONSENSE = "commonsense"
HARD = "hard"

MEAL_SLOTS = ("breakfast", "lunch", "dinner")


@dataclass(frozen=True)
class ConstraintId:
    family: str
    name: str


@dataclass(frozen=True)
class Violation:
    day_index: int | None
    slot: str
    message: str


@dataclass(frozen=True)
class ConstraintResult:
    id: ConstraintId
    violations: tuple[Violation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ConstraintReport:
    results: tuple[ConstraintResult, ...]

    def result_for(self, name: str) -> ConstraintResult | None:
        for result in self.results:
            if result.id.name == name:
                return result
        return None

    def passing_names(self) -> frozenset[str]:
        return frozenset(r.id.name for r in self.results if r.passed)

    def failing_names(self) -> tuple[str, ...]:
        return tuple(r.id.name for r in self.results if not r.passed)

    @property
    def n_failing(self) -> int:
        return sum(1 for r in self.results if not r.passed)

    @property
    def all_passed(self) -> bool:
        return self.n_failing == 0

    def family_results(self, family: str) -> tuple[ConstraintResult, ...]:
        return tuple(r for r in self.results if r.id.family == family)

    def to_json(self) -> dict:
        return {
            "results": [
                {
                    "family": r.id.family,
                    "name": r.id.name,
                    "passed": r.passed,
                    "violations": [
                        {"day_index": v.day_index, "slot": v.slot, "message": v.message}
                        for v in r.violations
                    ],
                }
                for r in self.results
            ],
            "n_failing": self.n_failing,
        }


@dataclass(frozen=True)
class CostBreakdown:
    transport: int
    lodging: int
    meals: int

    @property
    def total(self) -> int:
        return self.transport + self.lodging + self.meals

    def to_json(self) -> dict:
        return {
            "transport": self.transport,
            "lodging": self.lodging,
            "meals": self.meals,
            "total": self.total,
        }


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


# --------------------------------------------------------------------------
# Reference resolution


def day_cities(day: DayPlan) -> tuple[str, ...]:
    c = day.city_or_transition
    return c if isinstance(c, tuple) else (c,)


def is_transition(day: DayPlan) -> bool:
    return len(day_cities(day)) == 2


def home_city(day: DayPlan) -> str:
    # where the night is spent: the arrival city on transition days
    return day_cities(day)[-1]


def resolve_flight(flight_id: str, s: RetrievedSubset | None, d: SandboxDataset):
    if s is not None:
        found = s.find_flight(flight_id)
        if found is not None:
            return found
    return d.flight_index.get(flight_id)


def resolve_restaurant(ref, s: RetrievedSubset | None, d: SandboxDataset):
    if s is not None:
        found = s.find_restaurant(ref.name, ref.city)
        if found is not None:
            return found
    return d.restaurant_index.get((ref.name, ref.city))


def resolve_accommodation(ref, s: RetrievedSubset | None, d: SandboxDataset):
    if s is not None:
        found = s.find_accommodation(ref.name, ref.city)
        if found is not None:
            return found
    return d.accommodation_index.get((ref.name, ref.city))


def resolve_attraction(ref, s: RetrievedSubset | None, d: SandboxDataset):
    if s is not None:
        found = s.find_attraction(ref.name, ref.city)
        if found is not None:
            return found
    return d.attraction_index.get((ref.name, ref.city))


def filled_meals(it: Itinerary):
    for day in it.days:
        for slot in MEAL_SLOTS:
            ref = getattr(day, slot)
            if ref is not None:
                yield day, slot, ref


def accommodation_runs(it: Itinerary):
    """Maximal consecutive-day runs of one accommodation reference, as
    (ref, start_day_index, n_nights)."""
    runs: list[list] = []
    prev_key = None
    prev_day = None
    for day in it.days:
        ref = day.accommodation
        if ref is None:
            prev_key = None
            prev_day = None
            continue
        key = (ref.name, ref.city)
        if key == prev_key and prev_day == day.day_index - 1:
            runs[-1][2] += 1
        else:
            runs.append([ref, day.day_index, 1])
        prev_key = key
        prev_day = day.day_index
    return [(ref, start, nights) for ref, start, nights in runs]


# --------------------------------------------------------------------------
# Cost model


def leg_cost(leg: TransportLeg, party_size: int, s: RetrievedSubset, d: SandboxDataset | None = None) -> int:
    """Party-scaled cost of one transport leg; raises DanglingReferenceError
    when the underlying record cannot be resolved."""
    if leg.mode == "flight":
        record = resolve_flight(leg.flight_id, s, d if d is not None else s.source)
        if record is None:
            raise DanglingReferenceError(f"flight {leg.flight_id} not resolvable")
        return record.price * party_size
    entry = s.ground_by_leg.get((leg.origin, leg.destination))
    if entry is None:
        source = d if d is not None else s.source
        entry = source.distance_index.get((leg.origin, leg.destination))
    if entry is None:
        raise DanglingReferenceError(f"distance entry {leg.origin}->{leg.destination} not resolvable")
    if leg.mode == "taxi":
        return entry.taxi_cost * party_size
    if leg.mode == "self_drive":
        return entry.self_drive_cost * _ceil_div(party_size, VEHICLE_CAPACITY)
    raise DanglingReferenceError(f"unknown transport mode {leg.mode!r}")


def compute_cost(it: Itinerary, q: StructuredQuery, s: RetrievedSubset) -> CostBreakdown:
    """Exact integer cost of the itinerary; empty slots contribute nothing.

    Flights and taxis scale per person, self-drive per vehicle of capacity
    5, lodging per room with occupancy-driven room count, meals per person.
    """
    transport = 0
    lodging = 0
    meals = 0
    for day in it.days:
        if day.transport is not None:
            transport += leg_cost(day.transport, q.party_size, s)
        if day.accommodation is not None:
            record = resolve_accommodation(day.accommodation, s, s.source)
            if record is None:
                raise DanglingReferenceError(
                    f"accommodation {day.accommodation.name!r} ({day.accommodation.city}) not resolvable"
                )
            lodging += record.price_per_night * _ceil_div(q.party_size, record.max_occupancy)
        for slot in MEAL_SLOTS:
            ref = getattr(day, slot)
            if ref is None:
                continue
            record = resolve_restaurant(ref, s, s.source)
            if record is None:
                raise DanglingReferenceError(f"restaurant {ref.name!r} ({ref.city}) not resolvable")
            meals += record.avg_cost * q.party_size
    return CostBreakdown(transport=transport, lodging=lodging, meals=meals)


def lenient_cost_breakdown(it: Itinerary, q: StructuredQuery, s: RetrievedSubset | None, d: SandboxDataset) -> CostBreakdown:
    """Same arithmetic as compute_cost but unresolvable references count as
    0 (the within-sandbox checker reports those separately)."""
    transport = 0
    lodging = 0
    meals = 0
    for day in it.days:
        leg = day.transport
        if leg is not None:
            if leg.mode == "flight":
                record = resolve_flight(leg.flight_id, s, d)
                if record is not None:
                    transport += record.price * q.party_size
            else:
                entry = None
                if s is not None:
                    entry = s.ground_by_leg.get((leg.origin, leg.destination))
                if entry is None:
                    entry = d.distance_index.get((leg.origin, leg.destination))
                if entry is not None:
                    if leg.mode == "taxi":
                        transport += entry.taxi_cost * q.party_size
                    elif leg.mode == "self_drive":
                        transport += entry.self_drive_cost * _ceil_div(q.party_size, VEHICLE_CAPACITY)
        if day.accommodation is not None:
            record = resolve_accommodation(day.accommodation, s, d)
            if record is not None:
                lodging += record.price_per_night * _ceil_div(q.party_size, record.max_occupancy)
        for slot in MEAL_SLOTS:
            ref = getattr(day, slot)
            if ref is not None:
                record = resolve_restaurant(ref, s, d)
                if record is not None:
                    meals += record.avg_cost * q.party_size
    return CostBreakdown(transport=transport, lodging=lodging, meals=meals)


def lenient_total_cost(it: Itinerary, q: StructuredQuery, s: RetrievedSubset | None, d: SandboxDataset) -> int:
    return lenient_cost_breakdown(it, q, s, d).total


# --------------------------------------------------------------------------
# Commonsense checkers


def _check_within_sandbox(it, q, s, d) -> list[Violation]:
    out = []
    for day in it.days:
        for city in day_cities(day):
            if city not in d.city_index:
                out.append(Violation(day.day_index, "city", f"city {city!r} not in sandbox"))
        leg = day.transport
        if leg is not None:
            if leg.mode == "flight":
                if leg.flight_id not in d.flight_index:
                    out.append(Violation(day.day_index, "transport", f"flight {leg.flight_id} not in sandbox"))
            elif (leg.origin, leg.destination) not in d.distance_index:
                out.append(
                    Violation(
                        day.day_index,
                        "transport",
                        f"no distance entry {leg.origin}->{leg.destination} in sandbox",
                    )
                )
        if day.accommodation is not None:
            key = (day.accommodation.name, day.accommodation.city)
            if key not in d.accommodation_index:
                out.append(
                    Violation(day.day_index, "accommodation", f"accommodation {key} not in sandbox")
                )
        for slot in MEAL_SLOTS:
            ref = getattr(day, slot)
            if ref is not None and (ref.name, ref.city) not in d.restaurant_index:
                out.append(Violation(day.day_index, slot, f"restaurant ({ref.name!r}, {ref.city!r}) not in sandbox"))
        for ref in day.attractions:
            if (ref.name, ref.city) not in d.attraction_index:
                out.append(
                    Violation(day.day_index, "attractions", f"attraction ({ref.name!r}, {ref.city!r}) not in sandbox")
                )
    return out


def _check_complete_information(it, q, s, d) -> list[Violation]:
    out = []
    last_index = len(it.days) - 1
    for day in it.days:
        if is_transition(day) and day.transport is None:
            out.append(Violation(day.day_index, "transport", "transition day without transport"))
        for slot in MEAL_SLOTS:
            if getattr(day, slot) is None:
                out.append(Violation(day.day_index, slot, f"{slot} not planned"))
        if not day.attractions:
            out.append(Violation(day.day_index, "attractions", "no attraction planned"))
        if day.day_index < last_index and day.accommodation is None:
            out.append(Violation(day.day_index, "accommodation", "no accommodation planned"))
    return out


def _check_within_current_city(it, q, s, d) -> list[Violation]:
    out = []
    for day in it.days:
        allowed = set(day_cities(day))
        for slot in MEAL_SLOTS:
            ref = getattr(day, slot)
            if ref is not None and ref.city not in allowed:
                out.append(
                    Violation(day.day_index, slot, f"restaurant in {ref.city}, day is in {sorted(allowed)}")
                )
        for ref in day.attractions:
            if ref.city not in allowed:
                out.append(
                    Violation(day.day_index, "attractions", f"attraction in {ref.city}, day is in {sorted(allowed)}")
                )
        if day.accommodation is not None and day.accommodation.city != home_city(day):
            out.append(
                Violation(
                    day.day_index,
                    "accommodation",
                    f"accommodation in {day.accommodation.city}, night is spent in {home_city(day)}",
                )
            )
    return out


def _check_reasonable_city_route(it, q, s, d) -> list[Violation]:
    out = []
    if not it.days:
        return out
    if day_cities(it.days[0])[0] != q.origin:
        out.append(Violation(0, "city", f"route does not start at origin {q.origin}"))
    if day_cities(it.days[-1])[-1] != q.origin:
        out.append(Violation(len(it.days) - 1, "city", f"route does not end at origin {q.origin}"))

    # continuity between consecutive days
    for prev, cur in zip(it.days, it.days[1:]):
        if day_cities(prev)[-1] != day_cities(cur)[0]:
            out.append(
                Violation(
                    cur.day_index,
                    "city",
                    f"day starts in {day_cities(cur)[0]} but previous day ended in {day_cities(prev)[-1]}",
                )
            )

    # contiguity and coverage of destinations along the collapsed path
    path: list[str] = []
    for day in it.days:
        for city in day_cities(day):
            if not path or path[-1] != city:
                path.append(city)
    interior = [c for c in path[1:-1]] if len(path) >= 2 else []
    seen: set[str] = set()
    for city in interior:
        if city in seen:
            out.append(Violation(None, "route", f"city {city} revisited"))
        seen.add(city)
        if city not in q.destination_cities and city != q.origin:
            out.append(Violation(None, "route", f"unexpected city {city} on route"))
        if city == q.origin:
            out.append(Violation(None, "route", "route passes through origin mid-trip"))
    for city in q.destination_cities:
        if city not in seen:
            out.append(Violation(None, "route", f"destination {city} never visited"))

    # transition days must carry a leg that actually travels that transition
    for day in it.days:
        leg = day.transport
        if is_transition(day):
            a, b = day_cities(day)
            if leg is None:
                continue  # reported by complete_information; nothing to match
            if leg.mode == "flight":
                record = resolve_flight(leg.flight_id, s, d)
                if record is None:
                    continue  # within_sandbox reports the dangling id
                if (record.origin, record.destination) != (a, b):
                    out.append(
                        Violation(
                            day.day_index,
                            "transport",
                            f"flight flies {record.origin}->{record.destination}, day travels {a}->{b}",
                        )
                    )
                elif record.date != day.date:
                    out.append(
                        Violation(day.day_index, "transport", f"flight dated {record.date}, day is {day.date}")
                    )
            elif (leg.origin, leg.destination) != (a, b):
                out.append(
                    Violation(
                        day.day_index,
                        "transport",
                        f"leg covers {leg.origin}->{leg.destination}, day travels {a}->{b}",
                    )
                )
        elif leg is not None:
            out.append(Violation(day.day_index, "transport", "transport leg on a non-travel day"))
    return out


def _check_diverse_restaurants(it, q, s, d) -> list[Violation]:
    occurrences: dict[tuple[str, str], list[tuple[int, str]]] = {}
    for day, slot, ref in filled_meals(it):
        occurrences.setdefault((ref.name, ref.city), []).append((day.day_index, slot))
    out = []
    for (name, city), places in occurrences.items():
        if len(places) > 1:
            for day_index, slot in places:
                out.append(Violation(day_index, slot, f"restaurant {name!r} visited {len(places)} times"))
    out.sort(key=lambda v: (v.day_index, MEAL_SLOTS.index(v.slot)))
    return out


def _check_diverse_attractions(it, q, s, d) -> list[Violation]:
    occurrences: dict[tuple[str, str], list[int]] = {}
    for day in it.days:
        for ref in day.attractions:
            occurrences.setdefault((ref.name, ref.city), []).append(day.day_index)
    out = []
    for (name, city), days in occurrences.items():
        if len(days) > 1:
            for day_index in days:
                out.append(Violation(day_index, "attractions", f"attraction {name!r} visited {len(days)} times"))
    out.sort(key=lambda v: v.day_index)
    return out


def _check_non_conflicting_transportation(it, q, s, d) -> list[Violation]:
    modes = {day.transport.mode for day in it.days if day.transport is not None}
    if not ("flight" in modes and "self_drive" in modes):
        return []
    out = []
    for day in it.days:
        leg = day.transport
        if leg is not None and leg.mode in ("flight", "self_drive"):
            out.append(
                Violation(day.day_index, "transport", "trip mixes flight and self_drive legs")
            )
    return out


def _check_minimum_nights_stay(it, q, s, d) -> list[Violation]:
    out = []
    for ref, start, nights in accommodation_runs(it):
        record = resolve_accommodation(ref, s, d)
        if record is not None and nights < record.minimum_nights:
            out.append(
                Violation(
                    start,
                    "accommodation",
                    f"{ref.name!r} booked {nights} night(s), requires {record.minimum_nights}",
                )
            )
    return out


# --------------------------------------------------------------------------
# Hard checkers


def _check_budget(it, q, s, d) -> list[Violation]:
    total = lenient_total_cost(it, q, s, d)
    if total <= q.budget:
        return []
    return [Violation(None, "budget", f"total cost {total} exceeds budget {q.budget}")]


def _check_room_rule(it, q, s, d) -> list[Violation]:
    forbidden = frozenset(f"no_{need}" for need in q.hard.room_rule_needs)
    out = []
    for day in it.days:
        ref = day.accommodation
        if ref is None:
            continue
        record = resolve_accommodation(ref, s, d)
        if record is None:
            continue
        clash = record.house_rules & forbidden
        if clash:
            out.append(
                Violation(day.day_index, "accommodation", f"{ref.name!r} enforces {sorted(clash)}")
            )
    return out


def _check_cuisine(it, q, s, d) -> list[Violation]:
    chosen = list(filled_meals(it))
    if not chosen:
        return []  # nothing chosen yet: missing meals are completeness, not cuisine
    served: set[str] = set()
    for day, slot, ref in chosen:
        record = resolve_restaurant(ref, s, d)
        if record is not None:
            served |= record.cuisines
    return [
        Violation(None, "meals", f"requested cuisine {cuisine!r} never served")
        for cuisine in sorted(q.hard.cuisines - served)
    ]


def _check_room_type(it, q, s, d) -> list[Violation]:
    out = []
    for day in it.days:
        ref = day.accommodation
        if ref is None:
            continue
        record = resolve_accommodation(ref, s, d)
        if record is not None and record.room_type != q.hard.room_type:
            out.append(
                Violation(
                    day.day_index,
                    "accommodation",
                    f"{ref.name!r} is {record.room_type}, requested {q.hard.room_type}",
                )
            )
    return out


def _check_transportation(it, q, s, d) -> list[Violation]:
    out = []
    for day in it.days:
        leg = day.transport
        if leg is not None and leg.mode in q.hard.transport_bans:
            out.append(Violation(day.day_index, "transport", f"banned mode {leg.mode} used"))
    return out


# --------------------------------------------------------------------------
# Registry


CheckerFn = Callable[..., list[Violation]]

_REGISTRY: dict[str, tuple[ConstraintId, CheckerFn]] = {}
_ORDER: list[ConstraintId] = []


def register_checker(id: ConstraintId, fn: CheckerFn) -> None:
    if id.name in _REGISTRY:
        raise ValueError(f"checker {id.name!r} already registered")
    _REGISTRY[id.name] = (id, fn)
    _ORDER.append(id)


for _name, _fn in (
    ("within_sandbox", _check_within_sandbox),
    ("complete_information", _check_complete_information),
    ("within_current_city", _check_within_current_city),
    ("reasonable_city_route", _check_reasonable_city_route),
    ("diverse_restaurants", _check_diverse_restaurants),
    ("diverse_attractions", _check_diverse_attractions),
    ("non_conflicting_transportation", _check_non_conflicting_transportation),
    ("minimum_nights_stay", _check_minimum_nights_stay),
):
    register_checker(ConstraintId(COMMONSENSE, _name), _fn)

for _name, _fn in (
    ("budget", _check_budget),
    ("room_rule", _check_room_rule),
    ("cuisine", _check_cuisine),
    ("room_type", _check_room_type),
    ("transportation", _check_transportation),
):
    register_checker(ConstraintId(HARD, _name), _fn)


def constraint_ids() -> tuple[ConstraintId, ...]:
    return tuple(_ORDER)


def constraint_id(name: str) -> ConstraintId:
    return _REGISTRY[name][0]


def is_applicable(id: ConstraintId, q: StructuredQuery) -> bool:
    if id.family == COMMONSENSE:
        return True
    return {
        "budget": True,
        "room_rule": bool(q.hard.room_rule_needs),
        "cuisine": bool(q.hard.cuisines),
        "room_type": q.hard.room_type is not None,
        "transportation": bool(q.hard.transport_bans),
    }.get(id.name, True)


def applicable_ids(q: StructuredQuery) -> tuple[ConstraintId, ...]:
    return tuple(id for id in _ORDER if is_applicable(id, q))


def check(
    id: ConstraintId,
    it: Itinerary,
    q: StructuredQuery,
    s: RetrievedSubset | None,
    d: SandboxDataset,
) -> ConstraintResult:
    if not is_applicable(id, q):
        raise ApplicabilityError(f"constraint {id.name!r} not applicable to this query")
    _, fn = _REGISTRY[id.name]
    return ConstraintResult(id=id, violations=tuple(fn(it, q, s, d)))


def check_all(
    it: Itinerary,
    q: StructuredQuery,
    s: RetrievedSubset | None,
    d: SandboxDataset,
) -> ConstraintReport:
    return ConstraintReport(
        results=tuple(check(id, it, q, s, d) for id in applicable_ids(q))
    )
