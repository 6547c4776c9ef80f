"""The closed factual data space: records, CSV persistence, integrity checks,
and a seeded synthetic generator.

All money is integer cents. Flight times are minutes since midnight in
[0, 1440); a next-day arrival is encoded as ``arrive < depart`` together with
the ``overnight`` flag. The dataset is immutable after load and safe to share
across concurrent pipeline runs.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field, fields
from datetime import date, timedelta
from pathlib import Path

from .errors import ReferentialIntegrityError, SandboxParseError

ROOM_TYPES = ("entire_room", "private_room", "shared_room")
HOUSE_RULES = ("no_smoking", "no_parties", "no_children_under_10", "no_pets", "no_visitors")

CSV_FILES = {
    "cities": "cities.csv",
    "flights": "flights.csv",
    "accommodations": "accommodations.csv",
    "restaurants": "restaurants.csv",
    "attractions": "attractions.csv",
    "distances": "distances.csv",
}


@dataclass(frozen=True)
class City:
    name: str
    latitude: float
    longitude: float


@dataclass(frozen=True)
class Flight:
    id: str
    origin: str
    destination: str
    date: date
    depart: int
    arrive: int
    overnight: bool
    price: int


@dataclass(frozen=True)
class Accommodation:
    name: str
    city: str
    price_per_night: int
    room_type: str
    house_rules: frozenset[str]
    minimum_nights: int
    max_occupancy: int


@dataclass(frozen=True)
class Restaurant:
    name: str
    city: str
    avg_cost: int
    cuisines: frozenset[str]


@dataclass(frozen=True)
class Attraction:
    name: str
    city: str
    latitude: float
    longitude: float


@dataclass(frozen=True)
class DistanceEntry:
    origin: str
    destination: str
    distance_km: float
    duration_min: float
    taxi_cost: int
    self_drive_cost: int


@dataclass(frozen=True)
class SandboxDataset:
    """Immutable container for the six record collections.

    Lookup indexes are derived once; record identity is the primary key:
    city name, flight id, (name, city) for places, (origin, destination)
    for distances.
    """

    cities: tuple[City, ...]
    flights: tuple[Flight, ...]
    accommodations: tuple[Accommodation, ...]
    restaurants: tuple[Restaurant, ...]
    attractions: tuple[Attraction, ...]
    distances: tuple[DistanceEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "city_index", {c.name: c for c in self.cities})
        object.__setattr__(self, "flight_index", {f.id: f for f in self.flights})
        object.__setattr__(
            self, "accommodation_index", {(a.name, a.city): a for a in self.accommodations}
        )
        object.__setattr__(
            self, "restaurant_index", {(r.name, r.city): r for r in self.restaurants}
        )
        object.__setattr__(
            self, "attraction_index", {(a.name, a.city): a for a in self.attractions}
        )
        object.__setattr__(
            self, "distance_index", {(e.origin, e.destination): e for e in self.distances}
        )

    def distance_between(self, origin: str, destination: str) -> DistanceEntry | None:
        return self.distance_index.get((origin, destination))


@dataclass(frozen=True)
class IntegrityViolation:
    category: str  # geometry | time_window | price
    record: str
    message: str


@dataclass
class IntegrityReport:
    violations: list[IntegrityViolation] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not self.violations

    def by_category(self, category: str) -> list[IntegrityViolation]:
        return [v for v in self.violations if v.category == category]


# --------------------------------------------------------------------------
# CSV persistence


def _encode_value(value) -> str:
    if isinstance(value, frozenset):
        return ";".join(sorted(value))
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def _field_names(record_type) -> list[str]:
    return [f.name for f in fields(record_type)]


def write_sandbox(dataset: SandboxDataset, root_path: str | Path) -> None:
    """Write the six CSV table files for ``dataset`` under ``root_path``."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    tables = [
        ("cities", City, dataset.cities),
        ("flights", Flight, dataset.flights),
        ("accommodations", Accommodation, dataset.accommodations),
        ("restaurants", Restaurant, dataset.restaurants),
        ("attractions", Attraction, dataset.attractions),
        ("distances", DistanceEntry, dataset.distances),
    ]
    for key, record_type, records in tables:
        names = _field_names(record_type)
        with (root / CSV_FILES[key]).open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(names)
            for record in records:
                writer.writerow([_encode_value(getattr(record, n)) for n in names])


def _parse_int(raw: str, column: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"column {column!r}: expected integer, got {raw!r}")


def _parse_float(raw: str, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"column {column!r}: expected number, got {raw!r}")


def _parse_date(raw: str, column: str) -> date:
    try:
        return date.fromisoformat(raw)
    except ValueError:
        raise ValueError(f"column {column!r}: expected YYYY-MM-DD, got {raw!r}")


def _parse_bool(raw: str, column: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ValueError(f"column {column!r}: expected true/false, got {raw!r}")


def _parse_tags(raw: str) -> frozenset[str]:
    return frozenset(t for t in raw.split(";") if t)


def _read_table(path: Path, expected_columns: list[str], build_row):
    if not path.exists():
        raise FileNotFoundError(f"missing sandbox table file: {path}")
    records = []
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise SandboxParseError(f"{path.name}: empty file, header row required")
        if set(reader.fieldnames) != set(expected_columns):
            raise SandboxParseError(
                f"{path.name}: header {reader.fieldnames} does not match "
                f"expected columns {expected_columns}"
            )
        for line_no, row in enumerate(reader, start=2):
            # Short rows surface as None values, long rows under a None key.
            if None in row or None in row.values():
                raise SandboxParseError(
                    f"{path.name}:{line_no}: expected {len(expected_columns)} fields"
                )
            try:
                records.append(build_row(row))
            except ValueError as exc:
                raise SandboxParseError(f"{path.name}:{line_no}: {exc}") from exc
    return records


def load_sandbox(root_path: str | Path) -> SandboxDataset:
    """Load and cross-validate the six CSV tables under ``root_path``.

    Raises SandboxParseError for malformed rows or duplicate primary keys
    and ReferentialIntegrityError for records naming unknown cities.
    """
    root = Path(root_path)

    cities = _read_table(
        root / CSV_FILES["cities"],
        _field_names(City),
        lambda row: City(
            name=row["name"],
            latitude=_parse_float(row["latitude"], "latitude"),
            longitude=_parse_float(row["longitude"], "longitude"),
        ),
    )
    flights = _read_table(
        root / CSV_FILES["flights"],
        _field_names(Flight),
        lambda row: Flight(
            id=row["id"],
            origin=row["origin"],
            destination=row["destination"],
            date=_parse_date(row["date"], "date"),
            depart=_parse_int(row["depart"], "depart"),
            arrive=_parse_int(row["arrive"], "arrive"),
            overnight=_parse_bool(row["overnight"], "overnight"),
            price=_parse_int(row["price"], "price"),
        ),
    )
    accommodations = _read_table(
        root / CSV_FILES["accommodations"],
        _field_names(Accommodation),
        lambda row: _build_accommodation(row),
    )
    restaurants = _read_table(
        root / CSV_FILES["restaurants"],
        _field_names(Restaurant),
        lambda row: _build_restaurant(row),
    )
    attractions = _read_table(
        root / CSV_FILES["attractions"],
        _field_names(Attraction),
        lambda row: Attraction(
            name=row["name"],
            city=row["city"],
            latitude=_parse_float(row["latitude"], "latitude"),
            longitude=_parse_float(row["longitude"], "longitude"),
        ),
    )
    distances = _read_table(
        root / CSV_FILES["distances"],
        _field_names(DistanceEntry),
        lambda row: DistanceEntry(
            origin=row["origin"],
            destination=row["destination"],
            distance_km=_parse_float(row["distance_km"], "distance_km"),
            duration_min=_parse_float(row["duration_min"], "duration_min"),
            taxi_cost=_parse_int(row["taxi_cost"], "taxi_cost"),
            self_drive_cost=_parse_int(row["self_drive_cost"], "self_drive_cost"),
        ),
    )

    _reject_duplicates("cities.csv", [c.name for c in cities])
    _reject_duplicates("flights.csv", [f.id for f in flights])
    _reject_duplicates("accommodations.csv", [(a.name, a.city) for a in accommodations])
    _reject_duplicates("restaurants.csv", [(r.name, r.city) for r in restaurants])
    _reject_duplicates("attractions.csv", [(a.name, a.city) for a in attractions])
    _reject_duplicates("distances.csv", [(e.origin, e.destination) for e in distances])

    dataset = SandboxDataset(
        cities=tuple(cities),
        flights=tuple(flights),
        accommodations=tuple(accommodations),
        restaurants=tuple(restaurants),
        attractions=tuple(attractions),
        distances=tuple(distances),
    )
    _check_city_references(dataset)
    return dataset


def _build_accommodation(row) -> Accommodation:
    room_type = row["room_type"]
    if room_type not in ROOM_TYPES:
        raise ValueError(f"column 'room_type': {room_type!r} not one of {ROOM_TYPES}")
    rules = _parse_tags(row["house_rules"])
    unknown = rules - set(HOUSE_RULES)
    if unknown:
        raise ValueError(f"column 'house_rules': unknown rules {sorted(unknown)}")
    minimum_nights = _parse_int(row["minimum_nights"], "minimum_nights")
    max_occupancy = _parse_int(row["max_occupancy"], "max_occupancy")
    if minimum_nights < 1:
        raise ValueError("column 'minimum_nights': must be >= 1")
    if max_occupancy < 1:
        raise ValueError("column 'max_occupancy': must be >= 1")
    return Accommodation(
        name=row["name"],
        city=row["city"],
        price_per_night=_parse_int(row["price_per_night"], "price_per_night"),
        room_type=room_type,
        house_rules=rules,
        minimum_nights=minimum_nights,
        max_occupancy=max_occupancy,
    )


def _build_restaurant(row) -> Restaurant:
    cuisines = _parse_tags(row["cuisines"])
    if not cuisines:
        raise ValueError("column 'cuisines': must not be empty")
    return Restaurant(
        name=row["name"],
        city=row["city"],
        avg_cost=_parse_int(row["avg_cost"], "avg_cost"),
        cuisines=cuisines,
    )


def _reject_duplicates(file_name: str, keys: list) -> None:
    seen = set()
    for key in keys:
        if key in seen:
            raise SandboxParseError(f"{file_name}: duplicate primary key {key!r}")
        seen.add(key)


def _check_city_references(dataset: SandboxDataset) -> None:
    known = set(dataset.city_index)

    def require(city: str, where: str) -> None:
        if city not in known:
            raise ReferentialIntegrityError(f"{where} references unknown city {city!r}")

    for f in dataset.flights:
        require(f.origin, f"flight {f.id}")
        require(f.destination, f"flight {f.id}")
    for a in dataset.accommodations:
        require(a.city, f"accommodation {a.name!r}")
    for r in dataset.restaurants:
        require(r.city, f"restaurant {r.name!r}")
    for a in dataset.attractions:
        require(a.city, f"attraction {a.name!r}")
    for e in dataset.distances:
        require(e.origin, f"distance entry {e.origin}->{e.destination}")
        require(e.destination, f"distance entry {e.origin}->{e.destination}")


# --------------------------------------------------------------------------
# Integrity validation


def validate_integrity(
    dataset: SandboxDataset, taxi_sanity_factor: float | None = None
) -> IntegrityReport:
    """Check geometry, time windows, and price consistency.

    Violations are report entries, never exceptions; an empty report means
    the dataset is clean. ``taxi_sanity_factor`` enables the optional
    taxi_cost <= self_drive_cost * factor check (disabled by default).
    """
    report = IntegrityReport()
    add = report.violations.append

    seen_names: set[str] = set()
    for c in dataset.cities:
        if not -90.0 <= c.latitude <= 90.0 or not -180.0 <= c.longitude <= 180.0:
            add(IntegrityViolation("geometry", f"city {c.name}", "coordinates out of range"))
        if c.name in seen_names:
            add(IntegrityViolation("geometry", f"city {c.name}", "duplicate city name"))
        seen_names.add(c.name)
    for a in dataset.attractions:
        if not -90.0 <= a.latitude <= 90.0 or not -180.0 <= a.longitude <= 180.0:
            add(
                IntegrityViolation(
                    "geometry", f"attraction {a.name} ({a.city})", "coordinates out of range"
                )
            )
    for e in dataset.distances:
        if e.distance_km < 0 or e.duration_min < 0:
            add(
                IntegrityViolation(
                    "geometry",
                    f"distance {e.origin}->{e.destination}",
                    "negative distance or duration",
                )
            )

    for f in dataset.flights:
        if not 0 <= f.depart < 1440 or not 0 <= f.arrive < 1440:
            add(
                IntegrityViolation(
                    "time_window", f"flight {f.id}", "depart/arrive outside [0, 1440)"
                )
            )
        elif f.overnight != (f.arrive < f.depart) and f.arrive != f.depart:
            add(
                IntegrityViolation(
                    "time_window",
                    f"flight {f.id}",
                    "overnight flag inconsistent with depart/arrive",
                )
            )

    for f in dataset.flights:
        if f.price < 0:
            add(IntegrityViolation("price", f"flight {f.id}", "negative price"))
    for a in dataset.accommodations:
        if a.price_per_night < 0:
            add(
                IntegrityViolation(
                    "price", f"accommodation {a.name} ({a.city})", "negative price_per_night"
                )
            )
    for r in dataset.restaurants:
        if r.avg_cost < 0:
            add(IntegrityViolation("price", f"restaurant {r.name} ({r.city})", "negative avg_cost"))
    for e in dataset.distances:
        if e.taxi_cost < 0 or e.self_drive_cost < 0:
            add(
                IntegrityViolation(
                    "price", f"distance {e.origin}->{e.destination}", "negative transport cost"
                )
            )
        elif taxi_sanity_factor is not None and e.taxi_cost > e.self_drive_cost * taxi_sanity_factor:
            add(
                IntegrityViolation(
                    "price",
                    f"distance {e.origin}->{e.destination}",
                    f"taxi_cost exceeds self_drive_cost x {taxi_sanity_factor}",
                )
            )

    return report


# --------------------------------------------------------------------------
# Synthetic generation

_CITY_POOL = (
    "Arden", "Belmora", "Caldris", "Dorvale", "Elmsworth", "Fenwick", "Galton",
    "Harrowgate", "Istria", "Juniper", "Kelmont", "Larkspur", "Meridian",
    "Northbrook", "Oakhaven", "Pinecrest", "Quarry Bay", "Rosewood", "Silverton",
    "Thornbury", "Umberidge", "Vantage", "Westfall", "Yellowpine", "Zephyr Cove",
)
_RESTAURANT_ADJ = ("Golden", "Rustic", "Blue", "Jade", "Copper", "Velvet", "Amber", "Crimson", "Ivory", "Saffron")
_RESTAURANT_NOUN = ("Fork", "Table", "Lantern", "Kettle", "Orchard", "Harbor", "Spoon", "Garden", "Hearth", "Pavilion")
_HOTEL_PATTERNS = (
    "{} Grand Hotel", "{} Plaza", "Hotel {}", "{} Suites", "{} Lodge",
    "{} Rooms", "{} Inn", "{} Residence", "{} Courtyard", "{} Guesthouse",
)
_HOTEL_FILLERS = ("Amber", "Birch", "Cedar", "Drift", "Ember", "Fable", "Grove", "Harbor", "Iris", "Willow")
_ATTRACTION_KINDS = (
    "History Museum", "Botanical Garden", "Old Town", "Art Gallery", "Riverwalk",
    "Observatory", "Castle", "Market Square", "Science Center", "Harbor Park",
)
CUISINE_POOL = (
    "american", "chinese", "french", "indian", "italian",
    "japanese", "korean", "mediterranean", "mexican", "thai",
)

KM_PER_DEGREE = 100.0
TAXI_CENTS_PER_KM = 100  # per person
SELF_DRIVE_CENTS_PER_KM = 50  # per vehicle


@dataclass(frozen=True)
class GeneratorParams:
    n_cities: int = 4
    n_flights_per_pair: int = 2
    n_accommodations_per_city: int = 4
    n_restaurants_per_city: int = 6
    n_attractions_per_city: int = 5
    start_date: date = date(2026, 4, 1)
    n_days: int = 10


def generate_synthetic(seed: int, params: GeneratorParams = GeneratorParams()) -> SandboxDataset:
    """Deterministically synthesize a dataset: a pure function of (seed, params).

    Produces a full directed distance matrix between all city pairs and, for
    every ordered pair and every date in the window, n_flights_per_pair
    flights. Output always passes validate_integrity with an empty report.
    """
    if params.n_cities < 1:
        raise ValueError("n_cities must be >= 1")
    if params.n_flights_per_pair < 0:
        raise ValueError("n_flights_per_pair must be >= 0")
    for name in ("n_accommodations_per_city", "n_restaurants_per_city", "n_attractions_per_city"):
        if getattr(params, name) < 1:
            raise ValueError(f"{name} must be >= 1")
    if params.n_days < 1:
        raise ValueError("n_days must be >= 1")

    rng = random.Random(seed)

    names = list(rng.sample(_CITY_POOL, min(params.n_cities, len(_CITY_POOL))))
    while len(names) < params.n_cities:
        names.append(f"Newhaven {len(names) + 1}")
    cities = [
        City(
            name=name,
            latitude=round(rng.uniform(25.0, 48.0), 4),
            longitude=round(rng.uniform(-120.0, -70.0), 4),
        )
        for name in names
    ]
    by_name = {c.name: c for c in cities}

    accommodations: list[Accommodation] = []
    restaurants: list[Restaurant] = []
    attractions: list[Attraction] = []
    for city in cities:
        hotel_names = [p.format(f) for p in _HOTEL_PATTERNS for f in _HOTEL_FILLERS]
        for name in rng.sample(hotel_names, params.n_accommodations_per_city):
            accommodations.append(
                Accommodation(
                    name=name,
                    city=city.name,
                    price_per_night=rng.randrange(40, 240) * 100,
                    room_type=rng.choice(ROOM_TYPES),
                    house_rules=frozenset(r for r in HOUSE_RULES if rng.random() < 0.25),
                    minimum_nights=rng.choice((1, 1, 1, 1, 2, 2, 3)),
                    max_occupancy=rng.choice((1, 2, 2, 3, 4, 4, 6)),
                )
            )
        restaurant_names = [f"{a} {n}" for a in _RESTAURANT_ADJ for n in _RESTAURANT_NOUN]
        for name in rng.sample(restaurant_names, params.n_restaurants_per_city):
            restaurants.append(
                Restaurant(
                    name=name,
                    city=city.name,
                    avg_cost=rng.randrange(8, 60) * 100,
                    cuisines=frozenset(rng.sample(CUISINE_POOL, rng.randrange(1, 4))),
                )
            )
        kinds = list(_ATTRACTION_KINDS)
        while len(kinds) < params.n_attractions_per_city:
            kinds.append(f"Lookout {len(kinds) + 1}")
        for kind in rng.sample(kinds, params.n_attractions_per_city):
            attractions.append(
                Attraction(
                    name=f"{city.name} {kind}",
                    city=city.name,
                    latitude=round(min(90.0, max(-90.0, city.latitude + rng.uniform(-0.05, 0.05))), 4),
                    longitude=round(min(180.0, max(-180.0, city.longitude + rng.uniform(-0.05, 0.05))), 4),
                )
            )

    pairs = [(a.name, b.name) for a in cities for b in cities if a.name != b.name]
    distances = [_distance_entry(by_name[a], by_name[b]) for a, b in pairs]

    flights: list[Flight] = []
    counter = 1
    dates = [params.start_date + timedelta(days=i) for i in range(params.n_days)]
    for origin, destination in pairs:
        km = euclidean_km(by_name[origin], by_name[destination])
        for day in dates:
            for _ in range(params.n_flights_per_pair):
                depart = rng.randrange(5 * 60, 22 * 60)
                duration = max(45, round(km / 800 * 60)) + 20
                arrive_raw = depart + duration
                flights.append(
                    Flight(
                        id=f"F{counter:05d}",
                        origin=origin,
                        destination=destination,
                        date=day,
                        depart=depart,
                        arrive=arrive_raw % 1440,
                        overnight=arrive_raw >= 1440,
                        price=4000 + km * 8 + rng.randrange(0, 80) * 100,
                    )
                )
                counter += 1

    return SandboxDataset(
        cities=tuple(cities),
        flights=tuple(flights),
        accommodations=tuple(accommodations),
        restaurants=tuple(restaurants),
        attractions=tuple(attractions),
        distances=tuple(distances),
    )


def euclidean_km(a: City, b: City) -> int:
    """Planar city separation at 100 km/degree, rounded, never below 1."""
    degrees = math.hypot(a.latitude - b.latitude, a.longitude - b.longitude)
    return max(1, round(degrees * KM_PER_DEGREE))


def _distance_entry(a: City, b: City) -> DistanceEntry:
    km = euclidean_km(a, b)
    return DistanceEntry(
        origin=a.name,
        destination=b.name,
        distance_km=float(km),
        duration_min=float(round(km * 60 / 80)),
        taxi_cost=km * TAXI_CENTS_PER_KM,
        self_drive_cost=km * SELF_DRIVE_CENTS_PER_KM,
    )
