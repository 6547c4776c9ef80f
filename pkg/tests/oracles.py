"""Independent reference checkers used to cross-validate the engine.

Everything here works on plain dicts: the serialized day-list plan format
and CSV rows read straight from disk. Nothing imports the package under
test, so a bug in the engine cannot hide in a shared helper.
"""

from __future__ import annotations

import csv
import math
import os

VEHICLE_CAPACITY = 5


# --------------------------------------------------------------------------
# Raw table access


def load_tables(root: str) -> dict:
    tables = {}
    for key in ("cities", "flights", "accommodations", "restaurants", "attractions", "distances"):
        with open(os.path.join(root, f"{key}.csv"), newline="", encoding="utf-8") as handle:
            tables[key] = list(csv.DictReader(handle))
    return tables


def _split_tags(raw: str) -> set[str]:
    return {t for t in raw.split(";") if t}


def _place_key(label: str) -> tuple[str, str]:
    name, _, city = label.rpartition(", ")
    return name, city


def _find(rows, **match):
    for row in rows:
        if all(row[k] == v for k, v in match.items()):
            return row
    return None


def _day_cities(day: dict) -> list[str]:
    return [part.strip() for part in day["city_or_transition"].split("->")]


def _meal_labels(day: dict) -> list[tuple[str, str]]:
    out = []
    for slot in ("breakfast", "lunch", "dinner"):
        if day[slot] != "-":
            out.append((slot, day[slot]))
    return out


def _attraction_labels(day: dict) -> list[str]:
    if day["attractions"] == "-":
        return []
    return list(day["attractions"])


def _is_transition(day: dict) -> bool:
    return "->" in day["city_or_transition"]


# --------------------------------------------------------------------------
# Commonsense family


def oracle_within_sandbox(plan, query, tables) -> bool:
    city_names = {row["name"] for row in tables["cities"]}
    for day in plan:
        for city in _day_cities(day):
            if city not in city_names:
                return False
        leg = day["transport"]
        if leg != "-":
            if leg["mode"] == "flight":
                if _find(tables["flights"], id=leg["ref"]) is None:
                    return False
            else:
                a, b = [p.strip() for p in leg["ref"].split("->")]
                if _find(tables["distances"], origin=a, destination=b) is None:
                    return False
        for _, label in _meal_labels(day):
            name, city = _place_key(label)
            if _find(tables["restaurants"], name=name, city=city) is None:
                return False
        for label in _attraction_labels(day):
            name, city = _place_key(label)
            if _find(tables["attractions"], name=name, city=city) is None:
                return False
        if day["accommodation"] != "-":
            name, city = _place_key(day["accommodation"])
            if _find(tables["accommodations"], name=name, city=city) is None:
                return False
    return True


def oracle_complete_information(plan, query, tables) -> bool:
    for i, day in enumerate(plan):
        if _is_transition(day) and day["transport"] == "-":
            return False
        if len(_meal_labels(day)) != 3:
            return False
        if not _attraction_labels(day):
            return False
        if i != len(plan) - 1 and day["accommodation"] == "-":
            return False
    return True


def oracle_within_current_city(plan, query, tables) -> bool:
    for day in plan:
        allowed = set(_day_cities(day))
        for _, label in _meal_labels(day):
            if _place_key(label)[1] not in allowed:
                return False
        for label in _attraction_labels(day):
            if _place_key(label)[1] not in allowed:
                return False
        if day["accommodation"] != "-":
            if _place_key(day["accommodation"])[1] != _day_cities(day)[-1]:
                return False
    return True


def oracle_reasonable_city_route(plan, query, tables) -> bool:
    origin = query["origin"]
    dests = list(query["destinations"])

    cities_seq = [_day_cities(day) for day in plan]
    if cities_seq[0][0] != origin or cities_seq[-1][-1] != origin:
        return False
    for prev, cur in zip(cities_seq, cities_seq[1:]):
        if prev[-1] != cur[0]:
            return False

    collapsed = []
    for parts in cities_seq:
        for city in parts:
            if not collapsed or collapsed[-1] != city:
                collapsed.append(city)
    interior = collapsed[1:-1] if len(collapsed) > 1 else []
    if collapsed[0] != origin or (len(collapsed) > 1 and collapsed[-1] != origin):
        return False
    if origin in interior:
        return False
    if sorted(interior) != sorted(set(interior)):
        return False
    if set(interior) != set(dests):
        return False

    for day in plan:
        leg = day["transport"]
        if leg == "-":
            continue
        if not _is_transition(day):
            return False
        a, b = _day_cities(day)
        if leg["mode"] == "flight":
            row = _find(tables["flights"], id=leg["ref"])
            if row is None:
                continue  # existence is the sandbox check's business
            if row["origin"] != a or row["destination"] != b or row["date"] != day["date"]:
                return False
        else:
            la, lb = [p.strip() for p in leg["ref"].split("->")]
            if la != a or lb != b:
                return False
    return True


def oracle_diverse_restaurants(plan, query, tables) -> bool:
    seen = set()
    for day in plan:
        for _, label in _meal_labels(day):
            key = _place_key(label)
            if key in seen:
                return False
            seen.add(key)
    return True


def oracle_diverse_attractions(plan, query, tables) -> bool:
    seen = set()
    for day in plan:
        for label in _attraction_labels(day):
            key = _place_key(label)
            if key in seen:
                return False
            seen.add(key)
    return True


def oracle_non_conflicting_transportation(plan, query, tables) -> bool:
    modes = {day["transport"]["mode"] for day in plan if day["transport"] != "-"}
    return not ({"flight", "self_drive"} <= modes)


def oracle_minimum_nights_stay(plan, query, tables) -> bool:
    for label, nights in _stay_runs(plan):
        name, city = _place_key(label)
        row = _find(tables["accommodations"], name=name, city=city)
        if row is not None and nights < int(row["minimum_nights"]):
            return False
    return True


def _stay_runs(plan):
    runs = []
    prev = None
    for i, day in enumerate(plan):
        label = day["accommodation"]
        if label == "-":
            prev = None
            continue
        if prev is not None and prev[0] == label and prev[1] == i - 1:
            runs[-1][1] += 1
        else:
            runs.append([label, 1])
        prev = (label, i)
    return [(label, nights) for label, nights in runs]


# --------------------------------------------------------------------------
# Hard family


def oracle_trip_cost(plan, query, tables) -> int:
    party = query["party"]
    total = 0
    for day in plan:
        leg = day["transport"]
        if leg != "-":
            if leg["mode"] == "flight":
                row = _find(tables["flights"], id=leg["ref"])
                if row is not None:
                    total += int(row["price"]) * party
            else:
                a, b = [p.strip() for p in leg["ref"].split("->")]
                row = _find(tables["distances"], origin=a, destination=b)
                if row is not None:
                    if leg["mode"] == "taxi":
                        total += int(row["taxi_cost"]) * party
                    else:
                        total += int(row["self_drive_cost"]) * math.ceil(party / VEHICLE_CAPACITY)
        for _, label in _meal_labels(day):
            name, city = _place_key(label)
            row = _find(tables["restaurants"], name=name, city=city)
            if row is not None:
                total += int(row["avg_cost"]) * party
        if day["accommodation"] != "-":
            name, city = _place_key(day["accommodation"])
            row = _find(tables["accommodations"], name=name, city=city)
            if row is not None:
                total += int(row["price_per_night"]) * math.ceil(party / int(row["max_occupancy"]))
    return total


def oracle_budget(plan, query, tables) -> bool:
    return oracle_trip_cost(plan, query, tables) <= query["budget"]


def oracle_room_rule(plan, query, tables) -> bool:
    forbidden = {f"no_{need}" for need in query.get("needs", ())}
    if not forbidden:
        return True
    for day in plan:
        if day["accommodation"] == "-":
            continue
        name, city = _place_key(day["accommodation"])
        row = _find(tables["accommodations"], name=name, city=city)
        if row is not None and _split_tags(row["house_rules"]) & forbidden:
            return False
    return True


def oracle_cuisine(plan, query, tables) -> bool:
    wanted = set(query.get("cuisines", ()))
    if not wanted:
        return True
    filled = False
    served = set()
    for day in plan:
        for _, label in _meal_labels(day):
            filled = True
            name, city = _place_key(label)
            row = _find(tables["restaurants"], name=name, city=city)
            if row is not None:
                served |= _split_tags(row["cuisines"])
    if not filled:
        return True
    return wanted <= served


def oracle_room_type(plan, query, tables) -> bool:
    wanted = query.get("room_type")
    if wanted is None:
        return True
    for day in plan:
        if day["accommodation"] == "-":
            continue
        name, city = _place_key(day["accommodation"])
        row = _find(tables["accommodations"], name=name, city=city)
        if row is not None and row["room_type"] != wanted:
            return False
    return True


def oracle_transportation(plan, query, tables) -> bool:
    bans = set(query.get("bans", ()))
    if not bans:
        return True
    for day in plan:
        leg = day["transport"]
        if leg != "-" and leg["mode"] in bans:
            return False
    return True


ORACLES = {
    "within_sandbox": oracle_within_sandbox,
    "complete_information": oracle_complete_information,
    "within_current_city": oracle_within_current_city,
    "reasonable_city_route": oracle_reasonable_city_route,
    "diverse_restaurants": oracle_diverse_restaurants,
    "diverse_attractions": oracle_diverse_attractions,
    "non_conflicting_transportation": oracle_non_conflicting_transportation,
    "minimum_nights_stay": oracle_minimum_nights_stay,
    "budget": oracle_budget,
    "room_rule": oracle_room_rule,
    "cuisine": oracle_cuisine,
    "room_type": oracle_room_type,
    "transportation": oracle_transportation,
}
