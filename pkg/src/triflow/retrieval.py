"""Task-specific retrieval: carve the validated, deduplicated slice of the
sandbox that bounds everything the planner may touch.

Five independent module fetches (flights, ground transport, accommodations,
restaurants, attractions) run concurrently and merge in a fixed order, so the
result is identical for any execution interleaving. Records are never
synthesized here; dedupe_and_validate proves every survivor exists verbatim
in the source dataset, which is what later lets the within-sandbox checker
trust subset membership.
"""

from __future__ import annotations

import datetime
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import InfeasibleRetrieval, ProvenanceError, SandboxIntegrityError
from .request import StructuredQuery, TRANSPORT_MODES
from .sandbox import (
    Accommodation,
    Attraction,
    DistanceEntry,
    Flight,
    Restaurant,
    SandboxDataset,
    validate_integrity,
)

DEFAULT_CANDIDATE_CAP = 20

# fixed merge order; retrieval must be order-independent so this is the only
# ordering that ever matters
MODULE_ORDER = ("flights", "ground", "accommodations", "restaurants", "attractions")

LegKey = tuple[str, str, datetime.date]
GroundKey = tuple[str, str]


@dataclass(frozen=True)
class RetrievedSubset:
    flights_by_leg: dict[LegKey, tuple[Flight, ...]]
    ground_by_leg: dict[GroundKey, DistanceEntry]
    accommodations_by_city: dict[str, tuple[Accommodation, ...]]
    restaurants_by_city: dict[str, tuple[Restaurant, ...]]
    attractions_by_city: dict[str, tuple[Attraction, ...]]
    provenance: dict[tuple, str]
    allowed_modes: frozenset[str]
    source: SandboxDataset = field(repr=False)

    def all_restaurants(self) -> list[Restaurant]:
        return [r for pool in self.restaurants_by_city.values() for r in pool]

    def find_accommodation(self, name: str, city: str) -> Accommodation | None:
        for candidate in self.accommodations_by_city.get(city, ()):
            if candidate.name == name:
                return candidate
        return None

    def find_restaurant(self, name: str, city: str) -> Restaurant | None:
        for candidate in self.restaurants_by_city.get(city, ()):
            if candidate.name == name:
                return candidate
        return None

    def find_attraction(self, name: str, city: str) -> Attraction | None:
        for candidate in self.attractions_by_city.get(city, ()):
            if candidate.name == name:
                return candidate
        return None

    def find_flight(self, flight_id: str) -> Flight | None:
        for pool in self.flights_by_leg.values():
            for candidate in pool:
                if candidate.id == flight_id:
                    return candidate
        return None


def query_legs(q: StructuredQuery) -> list[GroundKey]:
    """Every directed leg some city ordering could use: origin out/in plus
    all destination-to-destination hops."""
    cities = [q.origin, *q.destination_cities]
    return [(a, b) for a in cities for b in cities if a != b]


def _cap_sorted(records: list, key, cap: int | None) -> tuple:
    ranked = sorted(records, key=key)
    return tuple(ranked if cap is None else ranked[:cap])


def _fetch_flights(q: StructuredQuery, d: SandboxDataset, cap: int | None):
    out: dict[LegKey, tuple[Flight, ...]] = {}
    if "flight" in q.hard.transport_bans:
        return out
    legs = set(query_legs(q))
    dates = set(q.dates)
    grouped: dict[LegKey, list[Flight]] = {}
    for f in d.flights:
        if (f.origin, f.destination) in legs and f.date in dates:
            grouped.setdefault((f.origin, f.destination, f.date), []).append(f)
    for leg_key in sorted(grouped, key=lambda k: (k[0], k[1], k[2].isoformat())):
        out[leg_key] = _cap_sorted(grouped[leg_key], lambda f: (f.price, f.id), cap)
    return out


def _fetch_ground(q: StructuredQuery, d: SandboxDataset):
    out: dict[GroundKey, DistanceEntry] = {}
    for leg in query_legs(q):
        entry = d.distance_between(*leg)
        if entry is not None:
            out[leg] = entry
    return out


def _fetch_accommodations(q: StructuredQuery, d: SandboxDataset, cap: int | None):
    forbidden = frozenset(f"no_{need}" for need in q.hard.room_rule_needs)
    out: dict[str, tuple[Accommodation, ...]] = {}
    for city in q.destination_cities:
        pool = [
            a
            for a in d.accommodations
            if a.city == city
            and (q.hard.room_type is None or a.room_type == q.hard.room_type)
            and not (a.house_rules & forbidden)
        ]
        out[city] = _cap_sorted(pool, lambda a: (a.price_per_night, a.name), cap)
    return out


def _fetch_restaurants(q: StructuredQuery, d: SandboxDataset, cap: int | None):
    cities = [q.origin, *q.destination_cities]
    out: dict[str, tuple[Restaurant, ...]] = {}
    for city in cities:
        pool = [r for r in d.restaurants if r.city == city]
        out[city] = _cap_sorted(pool, lambda r: (r.avg_cost, r.name), cap)
    # every requested cuisine keeps at least one candidate if the sandbox
    # has one in a reachable city, even past the cap
    for cuisine in sorted(q.hard.cuisines):
        if any(cuisine in r.cuisines for pool in out.values() for r in pool):
            continue
        extras = sorted(
            (r for r in d.restaurants if r.city in cities and cuisine in r.cuisines),
            key=lambda r: (r.avg_cost, r.name, r.city),
        )
        if extras:
            best = extras[0]
            out[best.city] = out[best.city] + (best,)
    return out


def _fetch_attractions(q: StructuredQuery, d: SandboxDataset, cap: int | None):
    cities = [q.origin, *q.destination_cities]
    out: dict[str, tuple[Attraction, ...]] = {}
    for city in cities:
        pool = [a for a in d.attractions if a.city == city]
        out[city] = _cap_sorted(pool, lambda a: a.name, cap)
    return out


def retrieve_subset(
    q: StructuredQuery,
    d: SandboxDataset,
    cap: int | None = DEFAULT_CANDIDATE_CAP,
    strict: bool = True,
) -> RetrievedSubset:
    """Run the five retrieval modules and merge their output.

    In strict mode an empty pool for a mandatory slot class raises
    InfeasibleRetrieval naming the slot; permissive mode leaves the pool
    empty and lets the planner deliver best-effort.
    """
    with ThreadPoolExecutor(max_workers=5) as pool:
        futures = {
            "flights": pool.submit(_fetch_flights, q, d, cap),
            "ground": pool.submit(_fetch_ground, q, d),
            "accommodations": pool.submit(_fetch_accommodations, q, d, cap),
            "restaurants": pool.submit(_fetch_restaurants, q, d, cap),
            "attractions": pool.submit(_fetch_attractions, q, d, cap),
        }
        fetched = {name: futures[name].result() for name in MODULE_ORDER}

    provenance: dict[tuple, str] = {}
    for leg_key, flights in fetched["flights"].items():
        for f in flights:
            provenance[("flight", f.id)] = "flights"
    for leg, entry in fetched["ground"].items():
        provenance[("ground",) + leg] = "ground"
    for city, accs in fetched["accommodations"].items():
        for a in accs:
            provenance[("accommodation", a.name, a.city)] = "accommodations"
    for city, rests in fetched["restaurants"].items():
        for r in rests:
            provenance[("restaurant", r.name, r.city)] = "restaurants"
    for city, atts in fetched["attractions"].items():
        for a in atts:
            provenance[("attraction", a.name, a.city)] = "attractions"

    subset = RetrievedSubset(
        flights_by_leg=fetched["flights"],
        ground_by_leg=fetched["ground"],
        accommodations_by_city=fetched["accommodations"],
        restaurants_by_city=fetched["restaurants"],
        attractions_by_city=fetched["attractions"],
        provenance=provenance,
        allowed_modes=frozenset(TRANSPORT_MODES) - q.hard.transport_bans,
        source=d,
    )
    subset = dedupe_and_validate(subset, d)

    if strict:
        _require_mandatory_pools(subset, q)
    return subset


def _require_mandatory_pools(s: RetrievedSubset, q: StructuredQuery) -> None:
    for city in q.destination_cities:
        if not s.accommodations_by_city.get(city):
            raise InfeasibleRetrieval(f"accommodations in {city}")
        if not s.restaurants_by_city.get(city):
            raise InfeasibleRetrieval(f"restaurants in {city}")
        if not s.attractions_by_city.get(city):
            raise InfeasibleRetrieval(f"attractions in {city}")

    def leg_covered(a: str, b: str) -> bool:
        if (a, b) in s.ground_by_leg:
            return True
        return any(k[0] == a and k[1] == b and s.flights_by_leg[k] for k in s.flights_by_leg)

    cities = [q.origin, *q.destination_cities]
    for city in q.destination_cities:
        if not any(leg_covered(other, city) for other in cities if other != city):
            raise InfeasibleRetrieval(f"transport into {city}")
        if not any(leg_covered(city, other) for other in cities if other != city):
            raise InfeasibleRetrieval(f"transport out of {city}")


def dedupe_and_validate(s: RetrievedSubset, d: SandboxDataset) -> RetrievedSubset:
    """Drop duplicate records (first occurrence wins) and prove every
    survivor exists verbatim in ``d``; re-check integrity on the survivors.

    A record that is missing from the dataset, or differs from the dataset
    copy under the same primary key, is a retrieval-module bug surfaced as
    ProvenanceError.
    """

    def dedupe(records, key):
        seen = set()
        kept = []
        for record in records:
            k = key(record)
            if k not in seen:
                seen.add(k)
                kept.append(record)
        return tuple(kept)

    flights_by_leg = {}
    for leg_key, pool in s.flights_by_leg.items():
        kept = dedupe(pool, lambda f: f.id)
        for f in kept:
            if d.flight_index.get(f.id) != f:
                raise ProvenanceError(f"flight {f.id} is not a verbatim dataset record")
        flights_by_leg[leg_key] = kept

    for leg, entry in s.ground_by_leg.items():
        if d.distance_index.get((entry.origin, entry.destination)) != entry:
            raise ProvenanceError(
                f"distance entry {entry.origin}->{entry.destination} is not a verbatim dataset record"
            )

    accommodations_by_city = {}
    for city, pool in s.accommodations_by_city.items():
        kept = dedupe(pool, lambda a: (a.name, a.city))
        for a in kept:
            if d.accommodation_index.get((a.name, a.city)) != a:
                raise ProvenanceError(f"accommodation {a.name!r} ({a.city}) is not a verbatim dataset record")
        accommodations_by_city[city] = kept

    restaurants_by_city = {}
    for city, pool in s.restaurants_by_city.items():
        kept = dedupe(pool, lambda r: (r.name, r.city))
        for r in kept:
            if d.restaurant_index.get((r.name, r.city)) != r:
                raise ProvenanceError(f"restaurant {r.name!r} ({r.city}) is not a verbatim dataset record")
        restaurants_by_city[city] = kept

    attractions_by_city = {}
    for city, pool in s.attractions_by_city.items():
        kept = dedupe(pool, lambda a: (a.name, a.city))
        for a in kept:
            if d.attraction_index.get((a.name, a.city)) != a:
                raise ProvenanceError(f"attraction {a.name!r} ({a.city}) is not a verbatim dataset record")
        attractions_by_city[city] = kept

    _recheck_integrity(flights_by_leg, s.ground_by_leg, accommodations_by_city,
                       restaurants_by_city, attractions_by_city, d)

    return RetrievedSubset(
        flights_by_leg=flights_by_leg,
        ground_by_leg=dict(s.ground_by_leg),
        accommodations_by_city=accommodations_by_city,
        restaurants_by_city=restaurants_by_city,
        attractions_by_city=attractions_by_city,
        provenance=dict(s.provenance),
        allowed_modes=s.allowed_modes,
        source=d,
    )


def _recheck_integrity(flights_by_leg, ground_by_leg, accommodations_by_city,
                       restaurants_by_city, attractions_by_city, d: SandboxDataset) -> None:
    city_names = set()
    flights = [f for pool in flights_by_leg.values() for f in pool]
    accommodations = [a for pool in accommodations_by_city.values() for a in pool]
    restaurants = [r for pool in restaurants_by_city.values() for r in pool]
    attractions = [a for pool in attractions_by_city.values() for a in pool]
    distances = list(ground_by_leg.values())
    for f in flights:
        city_names.update((f.origin, f.destination))
    for record in [*accommodations, *restaurants, *attractions]:
        city_names.add(record.city)
    for e in distances:
        city_names.update((e.origin, e.destination))
    mini = SandboxDataset(
        cities=tuple(d.city_index[name] for name in sorted(city_names) if name in d.city_index),
        flights=tuple(flights),
        accommodations=tuple(accommodations),
        restaurants=tuple(restaurants),
        attractions=tuple(attractions),
        distances=tuple(distances),
    )
    report = validate_integrity(mini)
    if not report.is_clean:
        first = report.violations[0]
        raise SandboxIntegrityError(
            f"retrieved subset fails integrity re-check: {first.category} on {first.record}: {first.message}"
        )
