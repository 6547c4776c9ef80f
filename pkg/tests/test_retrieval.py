from __future__ import annotations

from dataclasses import replace
from datetime import date

import pytest

from triflow.errors import InfeasibleRetrieval, ProvenanceError
from triflow.request import HardConstraintSet, UserRequest, decompose_query
from triflow.retrieval import (
    MODULE_ORDER,
    RetrievedSubset,
    dedupe_and_validate,
    query_legs,
    retrieve_subset,
)
from triflow.sandbox import generate_synthetic, GeneratorParams


@pytest.fixture(scope="module")
def dataset():
    return generate_synthetic(19, GeneratorParams(n_cities=4))


@pytest.fixture(scope="module")
def query(dataset):
    names = sorted(c.name for c in dataset.cities)
    return decompose_query(
        UserRequest(
            origin=names[0],
            destination_cities=(names[1], names[2]),
            dates=tuple(date(2026, 4, k) for k in (3, 4, 5, 6, 7)),
            party_size=2,
            budget=1_000_000,
        ),
        dataset,
    )


def test_query_legs_cover_all_directed_pairs(query):
    legs = query_legs(query)
    cities = {query.origin, *query.destination_cities}
    assert len(legs) == len(cities) * (len(cities) - 1)
    assert len(set(legs)) == len(legs)


def test_retrieved_flights_match_brute_force(dataset, query):
    s = retrieve_subset(query, dataset, cap=None)
    legs = set(query_legs(query))
    expected = [
        f
        for f in dataset.flights
        if (f.origin, f.destination) in legs and f.date in set(query.dates)
    ]
    got = [f for pool in s.flights_by_leg.values() for f in pool]
    assert sorted(got, key=lambda f: f.id) == sorted(expected, key=lambda f: f.id)


def test_retrieved_places_match_brute_force(dataset, query):
    s = retrieve_subset(query, dataset, cap=None)
    for city in query.destination_cities:
        expected = sorted(a.name for a in dataset.accommodations if a.city == city)
        assert sorted(a.name for a in s.accommodations_by_city[city]) == expected
    for city in (query.origin, *query.destination_cities):
        expected = sorted(r.name for r in dataset.restaurants if r.city == city)
        assert sorted(r.name for r in s.restaurants_by_city[city]) == expected
        expected = sorted(a.name for a in dataset.attractions if a.city == city)
        assert sorted(a.name for a in s.attractions_by_city[city]) == expected


def test_cap_keeps_cheapest(dataset, query):
    s = retrieve_subset(query, dataset, cap=2)
    for city, pool in s.restaurants_by_city.items():
        full = sorted(
            (r for r in dataset.restaurants if r.city == city),
            key=lambda r: (r.avg_cost, r.name),
        )
        assert list(pool[:2]) == full[:2]


def test_hard_filters_applied(dataset):
    names = sorted(c.name for c in dataset.cities)
    q = decompose_query(
        UserRequest(
            origin=names[0],
            destination_cities=(names[1],),
            dates=tuple(date(2026, 4, k) for k in (3, 4, 5)),
            party_size=2,
            budget=1_000_000,
            hard=HardConstraintSet(
                room_type="private_room",
                room_rule_needs=frozenset({"pets"}),
                transport_bans=frozenset({"flight"}),
            ),
        ),
        dataset,
    )
    s = retrieve_subset(q, dataset, cap=None, strict=False)
    assert s.flights_by_leg == {}
    assert "flight" not in s.allowed_modes
    for pool in s.accommodations_by_city.values():
        for a in pool:
            assert a.room_type == "private_room"
            assert "no_pets" not in a.house_rules


def test_cuisine_guarantee_survives_cap(dataset):
    names = sorted(c.name for c in dataset.cities)
    target_city = names[1]
    cities = (names[0], target_city)
    # with cap=1 each city keeps only its cheapest restaurant; pick a cuisine
    # those survivors do not serve so the guarantee has to reach past the cap
    kept_cuisines: set[str] = set()
    for city in cities:
        pool = sorted(
            (r for r in dataset.restaurants if r.city == city),
            key=lambda r: (r.avg_cost, r.name),
        )
        if pool:
            kept_cuisines |= pool[0].cuisines
    all_cuisines = {
        c for r in dataset.restaurants if r.city in cities for c in r.cuisines
    }
    missing = sorted(all_cuisines - kept_cuisines)
    assert missing, "generated sandbox should offer cuisine variety"
    rare = missing[0]
    q = decompose_query(
        UserRequest(
            origin=names[0],
            destination_cities=(target_city,),
            dates=tuple(date(2026, 4, k) for k in (3, 4, 5)),
            party_size=1,
            budget=1_000_000,
            hard=HardConstraintSet(cuisines=frozenset({rare})),
        ),
        dataset,
    )
    s = retrieve_subset(q, dataset, cap=1, strict=False)
    served = {c for pool in s.restaurants_by_city.values() for r in pool for c in r.cuisines}
    assert rare in served


def test_provenance_recorded_for_every_record(dataset, query):
    s = retrieve_subset(query, dataset, cap=3)
    assert set(s.provenance.values()) <= set(MODULE_ORDER)
    for pool in s.restaurants_by_city.values():
        for r in pool:
            assert s.provenance[("restaurant", r.name, r.city)] == "restaurants"


def test_tampered_record_raises_provenance_error(dataset, query):
    s = retrieve_subset(query, dataset, cap=3)
    city = query.destination_cities[0]
    real = s.restaurants_by_city[city][0]
    forged = replace(real, avg_cost=real.avg_cost + 1)
    tampered = RetrievedSubset(
        flights_by_leg=s.flights_by_leg,
        ground_by_leg=s.ground_by_leg,
        accommodations_by_city=s.accommodations_by_city,
        restaurants_by_city={**s.restaurants_by_city, city: (forged,)},
        attractions_by_city=s.attractions_by_city,
        provenance=s.provenance,
        allowed_modes=s.allowed_modes,
        source=dataset,
    )
    with pytest.raises(ProvenanceError):
        dedupe_and_validate(tampered, dataset)


def test_dedupe_is_idempotent(dataset, query):
    s = retrieve_subset(query, dataset, cap=5)
    again = dedupe_and_validate(s, dataset)
    assert again.restaurants_by_city == s.restaurants_by_city
    assert again.flights_by_leg == s.flights_by_leg


def test_strict_mode_names_the_missing_pool(dataset, query):
    stripped = SandboxStripper(dataset)
    with pytest.raises(InfeasibleRetrieval, match="restaurants in"):
        retrieve_subset(query, stripped.without_restaurants(query.destination_cities[0]), cap=None)


class SandboxStripper:
    def __init__(self, dataset):
        self.dataset = dataset

    def without_restaurants(self, city):
        from triflow.sandbox import SandboxDataset

        d = self.dataset
        return SandboxDataset(
            cities=d.cities,
            flights=d.flights,
            accommodations=d.accommodations,
            restaurants=tuple(r for r in d.restaurants if r.city != city),
            attractions=d.attractions,
            distances=d.distances,
        )


def test_permissive_mode_leaves_gap(dataset, query):
    stripped = SandboxStripper(dataset).without_restaurants(query.destination_cities[0])
    s = retrieve_subset(query, stripped, cap=None, strict=False)
    assert s.restaurants_by_city[query.destination_cities[0]] == ()
