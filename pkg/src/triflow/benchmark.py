"""Synthetic benchmark instances and batch execution.

Instance i of a batch is derived from ``random.Random(f"{seed}:{i}")``, so
any instance can be regenerated alone and the batch is stable under
reordering. Hard constraints are sampled against the dataset so that every
instance admits at least one satisfying plan; budgets are set a sampled
margin above a cheapest-cost estimate rather than handed out arbitrarily.
"""

from __future__ import annotations

import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import timedelta

from .orchestrator import PipelineConfig, PlanOutcome, run_pipeline
from .request import (
    ROOM_RULE_NEEDS,
    HardConstraintSet,
    StructuredQuery,
    UserRequest,
    request_to_json,
)
from .sandbox import SandboxDataset

# tier cycle: position in the batch fixes trip length and fan-out
_TIER_SHAPES = ((3, 1), (5, 2), (7, 3))

# every tier allocates exactly 2 nights per destination city
_MIN_RUN_NIGHTS = 2


def _eligible_stays(d: SandboxDataset, city: str, room_type: str | None, needs: set[str]):
    forbidden = {f"no_{need}" for need in needs}
    pool = []
    for a in d.accommodations:
        if a.city != city:
            continue
        if room_type is not None and a.room_type != room_type:
            continue
        if a.house_rules & forbidden:
            continue
        if a.minimum_nights > _MIN_RUN_NIGHTS:
            continue
        pool.append(a)
    return pool


def _cheapest_cost_estimate(
    d: SandboxDataset, origin: str, dests: tuple[str, ...], dates, party: int, hard: HardConstraintSet
) -> int:
    route = (origin, *dests, origin)
    total = 0
    for a, b in zip(route, route[1:]):
        options = []
        if "flight" not in hard.transport_bans:
            prices = [
                f.price for f in d.flights if f.origin == a and f.destination == b and f.date in dates
            ]
            if prices:
                options.append(min(prices) * party)
        entry = d.distance_between(a, b)
        if entry is not None:
            options.append(entry.taxi_cost * party)
            if "self_drive" not in hard.transport_bans:
                options.append(entry.self_drive_cost * math.ceil(party / 5))
        if options:
            total += min(options)

    for city in dests:
        pool = _eligible_stays(d, city, hard.room_type, set(hard.room_rule_needs))
        if not pool:
            pool = [a for a in d.accommodations if a.city == city]
        if pool:
            total += _MIN_RUN_NIGHTS * min(
                a.price_per_night * math.ceil(party / a.max_occupancy) for a in pool
            )

    # diversity forbids restaurant repeats, so the floor is the sum of the
    # cheapest distinct venues, not the single cheapest times the meal count
    meal_pool = sorted(r.avg_cost for r in d.restaurants if r.city in {origin, *dests})
    if meal_pool:
        n_meals = 3 * len(dates)
        take = meal_pool[:n_meals]
        take += [meal_pool[-1]] * (n_meals - len(take))
        total += party * sum(take)
    return total


def _sample_hard(rng: random.Random, d: SandboxDataset, dests: tuple[str, ...]) -> HardConstraintSet:
    room_type = None
    if rng.random() < 0.4:
        viable = [
            t
            for t in ("entire_room", "private_room", "shared_room")
            if all(_eligible_stays(d, city, t, set()) for city in dests)
        ]
        if viable:
            room_type = rng.choice(viable)

    needs: set[str] = set()
    n_needs = rng.choice((0, 0, 0, 1, 1, 2))
    for need in rng.sample(ROOM_RULE_NEEDS, len(ROOM_RULE_NEEDS)):
        if len(needs) >= n_needs:
            break
        trial = needs | {need}
        if all(_eligible_stays(d, city, room_type, trial) for city in dests):
            needs = trial

    cuisines: set[str] = set()
    if rng.random() < 0.5:
        served = sorted({c for r in d.restaurants if r.city in dests for c in r.cuisines})
        if served:
            cuisines = set(rng.sample(served, min(rng.choice((1, 1, 2)), len(served))))

    roll = rng.random()
    if roll < 0.2:
        bans = frozenset({"self_drive"})
    elif roll < 0.3:
        bans = frozenset({"flight"})
    else:
        bans = frozenset()

    return HardConstraintSet(
        room_rule_needs=frozenset(needs),
        room_type=room_type,
        cuisines=frozenset(cuisines),
        transport_bans=bans,
    )


def _preference_vocab(d: SandboxDataset, cities: frozenset[str]) -> list[str]:
    vocab = set()
    for a in d.attractions:
        if a.city in cities:
            vocab.update(t for t in a.name.lower().split() if t.isalpha() and len(t) > 3)
    for r in d.restaurants:
        if r.city in cities:
            vocab.update(r.cuisines)
    return sorted(vocab)


def synthesize_requests(d: SandboxDataset, n: int, seed: int = 0) -> list[UserRequest]:
    """Generate ``n`` satisfiable requests against dataset ``d``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    names = sorted(c.name for c in d.cities)
    if len(names) < 4:
        raise ValueError("dataset needs at least 4 cities for the hard tier")
    flight_dates = sorted({f.date for f in d.flights})
    if not flight_dates:
        raise ValueError("dataset has no flights to anchor trip dates")

    requests = []
    for i in range(n):
        rng = random.Random(f"{seed}:{i}")
        days, n_dest = _TIER_SHAPES[i % len(_TIER_SHAPES)]
        picked = rng.sample(names, n_dest + 1)
        origin, dests = picked[0], tuple(picked[1:])

        span = (flight_dates[-1] - flight_dates[0]).days + 1
        offset = rng.randrange(max(1, span - days + 1))
        start = flight_dates[0] + timedelta(days=offset)
        dates = tuple(start + timedelta(days=k) for k in range(days))

        party = rng.randint(1, 4)
        hard = _sample_hard(rng, d, dests)

        vocab = _preference_vocab(d, frozenset(dests))
        preferences = tuple(sorted(rng.sample(vocab, min(rng.randint(0, 3), len(vocab)))))
        raw_text = None
        if preferences and rng.random() < 0.2:
            raw_text = f"we would really like some {preferences[0]} on this trip"

        estimate = _cheapest_cost_estimate(d, origin, dests, dates, party, hard)
        budget = int(round(estimate * rng.uniform(1.25, 1.9)))

        requests.append(
            UserRequest(
                origin=origin,
                destination_cities=dests,
                dates=dates,
                party_size=party,
                budget=budget,
                hard=hard,
                preferences=preferences,
                raw_text=raw_text,
            )
        )
    return requests


def write_requests(requests: list[UserRequest], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for r in requests:
            handle.write(json.dumps(request_to_json(r), sort_keys=True) + "\n")


def _instance_seed(base_seed: int, index: int) -> int:
    return base_seed * 1_000_003 + index


def run_batch(
    d: SandboxDataset,
    requests: list[UserRequest],
    config: PipelineConfig | None = None,
    jobs: int = 1,
) -> list[tuple[StructuredQuery, PlanOutcome]]:
    """Run the pipeline over a batch. Each instance gets a seed derived from
    (config.seed, index) alone, so results do not depend on worker count or
    completion order."""
    config = config or PipelineConfig()

    def one(indexed: tuple[int, UserRequest]) -> tuple[StructuredQuery, PlanOutcome]:
        index, r = indexed
        cfg = replace(config, seed=_instance_seed(config.seed, index))
        outcome = run_pipeline(r, d, cfg)
        return outcome.query, outcome

    if jobs <= 1:
        return [one(pair) for pair in enumerate(requests)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, enumerate(requests)))
