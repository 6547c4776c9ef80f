"""Bounded repair: report, check, propose targeted adjustments, accept only
what provably helps.

Each iteration builds a system report (costs, timing notes, preference
satisfaction, full constraint results), derives rule-based repair proposals
for every violation class plus an optional preference improvement, then
plays each proposal against a copy of the itinerary. A proposal lands only
if the lexicographic objective strictly improves and every constraint that
passed before still passes, so feasibility can only ratchet upward. The
loop stops as soon as an iteration accepts nothing, or at the iteration
cap.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .agent import AgentHandle, role_for_stage
from .constraints import (
    MEAL_SLOTS,
    ConstraintReport,
    CostBreakdown,
    check_all,
    compute_cost,
    day_cities,
    home_city,
    is_transition,
    lenient_cost_breakdown,
    accommodation_runs,
    resolve_accommodation,
    resolve_attraction,
    resolve_flight,
    resolve_restaurant,
    VEHICLE_CAPACITY,
)
from .errors import DanglingReferenceError
from .planner import (
    Itinerary,
    PlaceRef,
    accommodation_candidates,
    alignment_score,
    apply_choice,
    attraction_candidates,
    item_tags,
    meal_candidates,
    query_fingerprint,
    transport_candidates,
)
from .request import StructuredQuery
from .retrieval import RetrievedSubset
from .sandbox import SandboxDataset

DEFAULT_MAX_ITERATIONS = 8
MAX_PROPOSALS_PER_ITERATION = 5

REPLACE_ITEM = "replace_item"
SWAP_DAYS = "swap_days"
DROP_ATTRACTION = "drop_attraction"
CHANGE_TRANSPORT_MODE = "change_transport_mode"


@dataclass(frozen=True)
class SystemReport:
    cost: CostBreakdown
    budget_slack: int
    timing: tuple[str, ...]
    preference_score: float
    constraint_report: ConstraintReport

    def to_json(self) -> dict:
        return {
            "cost": self.cost.to_json(),
            "budget_slack": self.budget_slack,
            "timing": list(self.timing),
            "preference_score": self.preference_score,
            "constraints": self.constraint_report.to_json(),
        }


@dataclass(frozen=True)
class Adjustment:
    kind: str
    target: str
    replacement: str | None
    rationale: str

    @property
    def dedupe_key(self) -> tuple:
        return (self.kind, self.target, self.replacement)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "target": self.target,
            "replacement": self.replacement,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class IterationRecord:
    report: SystemReport
    proposals: tuple[Adjustment, ...]
    accepted: tuple[Adjustment, ...]
    objective_before: tuple
    objective_after: tuple


@dataclass(frozen=True)
class GovernanceTrace:
    iterations: tuple[IterationRecord, ...]
    terminated_by: str  # converged | no_feasible_improvement | iteration_cap

    def to_json(self) -> dict:
        return {
            "terminated_by": self.terminated_by,
            "iterations": [
                {
                    "report": record.report.to_json(),
                    "proposals": [p.to_json() for p in record.proposals],
                    "accepted": [p.to_json() for p in record.accepted],
                    "objective_before": list(record.objective_before),
                    "objective_after": list(record.objective_after),
                }
                for record in self.iterations
            ],
        }


# --------------------------------------------------------------------------
# System report


def _fmt_minutes(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def _timing_notes(it: Itinerary, s: RetrievedSubset, d: SandboxDataset) -> tuple[str, ...]:
    notes = []
    for day in it.days:
        if not is_transition(day):
            continue
        a, b = day_cities(day)
        leg = day.transport
        if leg is None:
            notes.append(f"day {day.day_index}: transition {a} -> {b} has no transport planned")
        elif leg.mode == "flight":
            record = resolve_flight(leg.flight_id, s, d)
            if record is None:
                notes.append(f"day {day.day_index}: flight {leg.flight_id} unresolvable")
            else:
                suffix = " (+1 day)" if record.overnight else ""
                notes.append(
                    f"day {day.day_index}: flight {record.id} {a} -> {b} "
                    f"{_fmt_minutes(record.depart)} -> {_fmt_minutes(record.arrive)}{suffix}"
                )
        else:
            entry = s.ground_by_leg.get((a, b)) or d.distance_index.get((a, b))
            duration = f", about {entry.duration_min:.0f} min" if entry is not None else ""
            notes.append(f"day {day.day_index}: {leg.mode} {a} -> {b}{duration}")
    return tuple(notes)


@dataclass(frozen=True)
class SlotItem:
    slot: str
    kind: str  # transport | stay | meal | attraction
    day_index: int
    label: str
    cost: int
    alignment: float


def slot_items(it: Itinerary, q: StructuredQuery, s: RetrievedSubset, d: SandboxDataset) -> list[SlotItem]:
    """Every filled slot with its party-scaled cost and preference alignment,
    in a fixed traversal order (transport, stays, meals, attractions)."""
    party = q.party_size
    items: list[SlotItem] = []
    for day in it.days:
        leg = day.transport
        if leg is None:
            continue
        if leg.mode == "flight":
            record = resolve_flight(leg.flight_id, s, d)
            cost = record.price * party if record is not None else 0
            label = f"flight {leg.flight_id}"
        else:
            entry = s.ground_by_leg.get((leg.origin, leg.destination)) or d.distance_index.get(
                (leg.origin, leg.destination)
            )
            if entry is None:
                cost = 0
            elif leg.mode == "taxi":
                cost = entry.taxi_cost * party
            else:
                cost = entry.self_drive_cost * -(-party // VEHICLE_CAPACITY)
            label = leg.mode
        items.append(SlotItem(f"transport:{day.day_index}", "transport", day.day_index, label, cost, 0.0))

    for ref, start, nights in accommodation_runs(it):
        record = resolve_accommodation(ref, s, d)
        if record is None:
            cost = 0
            alignment = 0.0
        else:
            rooms = -(-party // record.max_occupancy)
            cost = record.price_per_night * rooms * nights
            alignment = alignment_score(item_tags(record), q)
        indices = ",".join(str(i) for i in range(start, start + nights))
        items.append(SlotItem(f"stay:{indices}", "stay", start, str(ref), cost, alignment))

    for day in it.days:
        for slot in MEAL_SLOTS:
            ref = getattr(day, slot)
            if ref is None:
                continue
            record = resolve_restaurant(ref, s, d)
            cost = record.avg_cost * party if record is not None else 0
            alignment = alignment_score(item_tags(record), q) if record is not None else 0.0
            items.append(SlotItem(f"{slot}:{day.day_index}", "meal", day.day_index, str(ref), cost, alignment))

    for day in it.days:
        for ref in day.attractions:
            record = resolve_attraction(ref, s, d)
            alignment = alignment_score(item_tags(record), q) if record is not None else 0.0
            items.append(
                SlotItem(f"attraction:{day.day_index}|{ref}", "attraction", day.day_index, str(ref), 0, alignment)
            )
    return items


def preference_score(it: Itinerary, q: StructuredQuery, s: RetrievedSubset, d: SandboxDataset) -> float:
    items = slot_items(it, q, s, d)
    if not items:
        return 0.0
    return sum(item.alignment for item in items) / len(items)


def build_system_report(it: Itinerary, q: StructuredQuery, s: RetrievedSubset, d: SandboxDataset) -> SystemReport:
    try:
        cost = compute_cost(it, q, s)
    except DanglingReferenceError:
        cost = lenient_cost_breakdown(it, q, s, d)
    return SystemReport(
        cost=cost,
        budget_slack=q.budget - cost.total,
        timing=_timing_notes(it, s, d),
        preference_score=preference_score(it, q, s, d),
        constraint_report=check_all(it, q, s, d),
    )


def objective(report: SystemReport) -> tuple:
    """Lexicographic: fewer failing constraints, then higher preference
    score, then lower total cost. Lower tuples are better."""
    return (
        report.constraint_report.n_failing,
        -report.preference_score,
        report.cost.total,
    )


# --------------------------------------------------------------------------
# Rule-based proposers


def _stay_slot_for_day(it: Itinerary, day_index: int) -> tuple[str, str, int] | None:
    for ref, start, nights in accommodation_runs(it):
        if start <= day_index < start + nights:
            indices = ",".join(str(i) for i in range(start, start + nights))
            return (f"stay:{indices}", ref.city, nights)
    return None


def _current_meal_labels(it: Itinerary) -> set[str]:
    return {str(getattr(day, slot)) for day in it.days for slot in MEAL_SLOTS if getattr(day, slot) is not None}


def _meal_replacement(it: Itinerary, day, q, s, require_cuisines=frozenset(), skip_labels=()) -> str | None:
    exclude = it.used_restaurant_keys()
    candidates = meal_candidates(day, q, s, exclude, frozenset(require_cuisines))
    for candidate in candidates:
        if require_cuisines and not (candidate.payload.cuisines & require_cuisines):
            continue
        if candidate.key in skip_labels:
            continue
        return candidate.key
    return None


def _propose_for_violation(name: str, result, it: Itinerary, q: StructuredQuery,
                           s: RetrievedSubset, d: SandboxDataset,
                           report: SystemReport) -> list[Adjustment]:
    out: list[Adjustment] = []
    if name == "budget":
        out.extend(_propose_budget(it, q, s, d, report))
    elif name == "cuisine":
        out.extend(_propose_cuisine(result, it, q, s, d))
    elif name == "diverse_restaurants":
        out.extend(_propose_diverse_restaurants(it, q, s))
    elif name == "diverse_attractions":
        out.extend(_propose_diverse_attractions(it, q, s))
    elif name in ("room_rule", "room_type", "minimum_nights_stay"):
        out.extend(_propose_stay_repair(name, result, it, q, s))
    elif name in ("transportation", "non_conflicting_transportation"):
        out.extend(_propose_transport_repair(name, it, q, s))
    elif name in ("within_sandbox", "within_current_city", "complete_information"):
        out.extend(_propose_slot_repair(name, result, it, q, s))
    # reasonable_city_route failures are structural: the skeleton is frozen
    # in the ledger, so no slot-level adjustment can address them
    return out


def _propose_budget(it, q, s, d, report: SystemReport) -> list[Adjustment]:
    items = [i for i in slot_items(it, q, s, d) if i.kind in ("transport", "stay", "meal")]
    items.sort(key=lambda i: (-i.cost, i.slot))
    overshoot = report.cost.total - q.budget

    # incremental swaps must not trade away preference alignment, or the
    # lexicographic objective will veto them while budget still fails
    swaps: list[Adjustment] = []
    for item in items:
        for label, saving in _cheap_alternatives(item, it, q, s, min_alignment=item.alignment):
            if saving <= 0:
                continue
            swaps.append(
                Adjustment(
                    REPLACE_ITEM,
                    item.slot,
                    label,
                    f"over budget: swap {item.label} (saves {saving} cents)",
                )
            )
    out = swaps[:4]

    # a swap big enough to clear the whole overshoot flips the check to
    # passing, so it may spend alignment freely; offer more than one since
    # the acceptance gate may veto any individual candidate
    clearing: list[tuple[int, Adjustment]] = []
    for item in items:
        for label, saving in _cheap_alternatives(item, it, q, s):
            if saving < overshoot:
                continue
            clearing.append(
                (
                    saving,
                    Adjustment(
                        REPLACE_ITEM,
                        item.slot,
                        label,
                        f"over budget: swap {item.label} (saves {saving} cents, clears the overshoot)",
                    ),
                )
            )
    clearing.sort(key=lambda pair: -pair[0])
    for _, adj in clearing[:2]:
        if adj not in out:
            out.insert(min(1, len(out)), adj)
    return out


def _cheap_alternatives(
    item: SlotItem, it, q, s, min_alignment: float | None = None, limit: int = 2
) -> list[tuple[str, int]]:
    """Up to ``limit`` cheapest stand-ins for one slot item, as (label,
    saving) pairs sorted cheapest first."""
    party = q.party_size
    if item.kind == "meal":
        slot_name, _, day_index = item.slot.partition(":")
        day = it.day(int(day_index))
        pool = []
        exclude = it.used_restaurant_keys()
        for city in day_cities(day):
            for r in s.restaurants_by_city.get(city, ()):
                if (r.name, r.city) in exclude:
                    continue
                if min_alignment is not None and alignment_score(item_tags(r), q) < min_alignment:
                    continue
                pool.append(r)
        pool.sort(key=lambda r: (r.avg_cost, r.name))
        return [
            (f"{r.name}, {r.city}", item.cost - r.avg_cost * party) for r in pool[:limit]
        ]
    if item.kind == "stay":
        indices = [int(p) for p in item.slot.split(":", 1)[1].split(",")]
        nights = len(indices)
        city = home_city(it.day(indices[0]))
        scored = []
        for a in s.accommodations_by_city.get(city, ()):
            if a.minimum_nights > nights or a.name == item.label.rsplit(", ", 1)[0]:
                continue
            if min_alignment is not None and alignment_score(item_tags(a), q) < min_alignment:
                continue
            rooms = -(-party // a.max_occupancy)
            scored.append((a.price_per_night * rooms * nights, a.name, a))
        scored.sort(key=lambda t: t[:2])
        return [
            (f"{a.name}, {a.city}", item.cost - cost) for cost, _, a in scored[:limit]
        ]
    if item.kind == "transport":
        day = it.day(item.day_index)
        pool = [c for c in transport_candidates(day, q, s) if c.key != item.label]
        pool.sort(key=lambda c: (c.payload.cost, c.key))
        # one candidate per mode: the cheapest flight may be vetoed by the
        # mode-conflict rule, so the cheapest ground option must also appear
        by_mode: dict[str, object] = {}
        for c in pool:
            by_mode.setdefault(c.payload.mode, c)
        picks = sorted(by_mode.values(), key=lambda c: (c.payload.cost, c.key))
        return [(c.key, item.cost - c.payload.cost) for c in picks]
    return []


def _propose_cuisine(result, it, q, s, d) -> list[Adjustment]:
    out = []
    # which chosen meals are the sole provider of a requested cuisine
    providers: dict[str, list[str]] = {c: [] for c in q.hard.cuisines}
    meal_records = []
    for day in it.days:
        for slot in MEAL_SLOTS:
            ref = getattr(day, slot)
            if ref is None:
                continue
            record = resolve_restaurant(ref, s, d)
            meal_records.append((day, slot, ref, record))
            if record is not None:
                for cuisine in q.hard.cuisines & record.cuisines:
                    providers[cuisine].append(f"{slot}:{day.day_index}")
    protected = {slots[0] for cuisine, slots in providers.items() if len(slots) == 1}

    missing = sorted(
        v.message.split("'")[1] for v in result.violations if "'" in v.message
    )
    targets = []
    for day, slot, ref, record in meal_records:
        slot_id = f"{slot}:{day.day_index}"
        if slot_id in protected:
            continue
        alignment = alignment_score(item_tags(record), q) if record is not None else 0.0
        targets.append((alignment, day.day_index, MEAL_SLOTS.index(slot), slot_id, day))
    targets.sort()

    for cuisine in missing:
        for _, _, _, slot_id, day in targets:
            label = _meal_replacement(it, day, q, s, require_cuisines={cuisine})
            if label is not None:
                out.append(
                    Adjustment(REPLACE_ITEM, slot_id, label, f"cuisine {cuisine!r} missing from the trip")
                )
                break
    return out


def _propose_diverse_restaurants(it, q, s) -> list[Adjustment]:
    seen: set[tuple[str, str]] = set()
    out = []
    for day in it.days:
        for slot in MEAL_SLOTS:
            ref = getattr(day, slot)
            if ref is None:
                continue
            if ref.key in seen:
                label = _meal_replacement(it, day, q, s)
                if label is not None:
                    out.append(
                        Adjustment(
                            REPLACE_ITEM,
                            f"{slot}:{day.day_index}",
                            label,
                            f"{ref.name!r} repeats an earlier meal",
                        )
                    )
            seen.add(ref.key)
    return out


def _propose_diverse_attractions(it, q, s) -> list[Adjustment]:
    seen: set[tuple[str, str]] = set()
    out = []
    for day in it.days:
        for ref in day.attractions:
            if ref.key in seen:
                exclude = it.used_attraction_keys()
                candidates = attraction_candidates(day, q, s, exclude)
                if candidates:
                    out.append(
                        Adjustment(
                            REPLACE_ITEM,
                            f"attraction:{day.day_index}|{ref}",
                            candidates[0].key,
                            f"{ref.name!r} repeats an earlier visit",
                        )
                    )
                elif len(day.attractions) > 1:
                    out.append(
                        Adjustment(
                            DROP_ATTRACTION,
                            f"attraction:{day.day_index}",
                            str(ref),
                            f"{ref.name!r} repeats an earlier visit and has no substitute",
                        )
                    )
            seen.add(ref.key)
    return out


def _propose_stay_repair(name, result, it, q, s) -> list[Adjustment]:
    out = []
    handled = set()
    for violation in result.violations:
        located = _stay_slot_for_day(it, violation.day_index)
        if located is None or located[0] in handled:
            continue
        slot, city, nights = located
        handled.add(slot)
        current = None
        for ref, start, run_nights in accommodation_runs(it):
            if f"stay:{','.join(str(i) for i in range(start, start + run_nights))}" == slot:
                current = str(ref)
        for candidate in accommodation_candidates(city, nights, q, s):
            label = f"{candidate.payload.name}, {candidate.payload.city}"
            if label != current:
                out.append(Adjustment(REPLACE_ITEM, slot, label, f"{name} violated by {current}"))
                break
    return out


def _propose_transport_repair(name, it, q, s) -> list[Adjustment]:
    out = []
    modes = {day.transport.mode for day in it.days if day.transport is not None}
    conflict = "flight" in modes and "self_drive" in modes
    for day in it.days:
        leg = day.transport
        if leg is None:
            continue
        offending = leg.mode in q.hard.transport_bans or (
            conflict and name == "non_conflicting_transportation" and leg.mode == "self_drive"
        )
        if not offending:
            continue
        for candidate in transport_candidates(day, q, s):
            if candidate.payload.mode != leg.mode and candidate.payload.mode != "self_drive":
                out.append(
                    Adjustment(
                        CHANGE_TRANSPORT_MODE,
                        f"transport:{day.day_index}",
                        candidate.key,
                        f"{leg.mode} leg on day {day.day_index} violates {name}",
                    )
                )
                break
    return out


def _propose_slot_repair(name, result, it, q, s) -> list[Adjustment]:
    out = []
    for violation in result.violations[:2]:
        day_index = violation.day_index
        if day_index is None:
            continue
        day = it.day(day_index)
        slot = violation.slot
        if slot == "transport":
            candidates = transport_candidates(day, q, s)
            current = day.transport.ref if day.transport is not None else None
            for candidate in candidates:
                if candidate.key != current:
                    out.append(Adjustment(REPLACE_ITEM, f"transport:{day_index}", candidate.key, violation.message))
                    break
        elif slot in MEAL_SLOTS:
            label = _meal_replacement(it, day, q, s)
            if label is not None:
                out.append(Adjustment(REPLACE_ITEM, f"{slot}:{day_index}", label, violation.message))
        elif slot == "attractions":
            bad = None
            allowed = set(day_cities(day))
            for ref in day.attractions:
                in_sandbox = s.source.attraction_index.get(ref.key) is not None
                if (name == "within_sandbox" and not in_sandbox) or (
                    name == "within_current_city" and ref.city not in allowed
                ):
                    bad = ref
                    break
            candidates = attraction_candidates(day, q, s, it.used_attraction_keys())
            if candidates:
                target = f"attraction:{day_index}" if bad is None else f"attraction:{day_index}|{bad}"
                out.append(Adjustment(REPLACE_ITEM, target, candidates[0].key, violation.message))
        elif slot == "accommodation":
            located = _stay_slot_for_day(it, day_index)
            if located is not None:
                stay_slot, city, nights = located
            else:
                # an empty night: cover the whole contiguous gap around this day
                indices = [day_index]
                while indices[0] - 1 >= 0 and it.day(indices[0] - 1).accommodation is None \
                        and home_city(it.day(indices[0] - 1)) == home_city(day):
                    indices.insert(0, indices[0] - 1)
                last = len(it.days) - 1
                while indices[-1] + 1 < last and it.day(indices[-1] + 1).accommodation is None \
                        and home_city(it.day(indices[-1] + 1)) == home_city(day):
                    indices.append(indices[-1] + 1)
                stay_slot = "stay:" + ",".join(str(i) for i in indices)
                city, nights = home_city(day), len(indices)
            candidates = accommodation_candidates(city, nights, q, s)
            if candidates:
                label = f"{candidates[0].payload.name}, {candidates[0].payload.city}"
                out.append(Adjustment(REPLACE_ITEM, stay_slot, label, violation.message))
    return out


def _propose_improvement(it, q, s, d, agent: AgentHandle | None, temperature) -> list[Adjustment]:
    items = [i for i in slot_items(it, q, s, d) if i.kind in ("stay", "meal", "attraction")]
    if not items:
        return []
    lowest = min(items, key=lambda i: (i.alignment, i.slot))
    alternatives = _alternatives_for(lowest, it, q, s)
    better = [c for c in alternatives if c.alignment > lowest.alignment]
    out = []
    if better:
        out.append(
            Adjustment(
                REPLACE_ITEM,
                lowest.slot,
                better[0].key,
                f"raise alignment of weakest pick {lowest.label}",
            )
        )
        if agent is not None and len(better) > 1:
            role = role_for_stage("governance", temperature)
            labels = [c.key for c in better[:3]]
            context = f"{query_fingerprint(q)}|improve|{lowest.slot}|{labels}"
            pick = labels[agent.suggest(role, context, labels).choice_index]
            out.append(
                Adjustment(REPLACE_ITEM, lowest.slot, pick, f"agent pick for weakest slot {lowest.slot}")
            )
    return out


def _alternatives_for(item: SlotItem, it, q, s):
    if item.kind == "meal":
        slot_name, _, day_index = item.slot.partition(":")
        return meal_candidates(it.day(int(day_index)), q, s, it.used_restaurant_keys())
    if item.kind == "stay":
        indices = [int(p) for p in item.slot.split(":", 1)[1].split(",")]
        city = home_city(it.day(indices[0]))
        return [
            c
            for c in accommodation_candidates(city, len(indices), q, s)
            if f"{c.payload.name}, {c.payload.city}" != item.label
        ]
    if item.kind == "attraction":
        day_index = int(item.slot.split(":", 1)[1].split("|", 1)[0])
        return attraction_candidates(it.day(day_index), q, s, it.used_attraction_keys())
    return []


def propose_adjustments(report: SystemReport, it: Itinerary, q: StructuredQuery,
                        s: RetrievedSubset, agent: AgentHandle | None = None,
                        temperature: float | None = None) -> list[Adjustment]:
    """At most 5 deduplicated proposals: the deterministic repair for each
    failing constraint in registry order, then a preference improvement for
    the weakest filled slot (with an agent-picked variant when room allows)."""
    d = s.source
    out: list[Adjustment] = []
    for result in report.constraint_report.results:
        if result.passed:
            continue
        out.extend(_propose_for_violation(result.id.name, result, it, q, s, d, report))
    out.extend(_propose_improvement(it, q, s, d, agent, temperature))

    deduped: list[Adjustment] = []
    seen = set()
    current_labels = {i.slot: i.label for i in slot_items(it, q, s, d)}
    for adj in out:
        if adj.dedupe_key in seen:
            continue
        if adj.kind == REPLACE_ITEM and current_labels.get(adj.target) == adj.replacement:
            continue
        seen.add(adj.dedupe_key)
        deduped.append(adj)
        if len(deduped) == MAX_PROPOSALS_PER_ITERATION:
            break
    return deduped


# --------------------------------------------------------------------------
# Applying adjustments


def _find_payload(kind_hint: str, label: str, day, q, s):
    if kind_hint == "transport":
        for candidate in transport_candidates(day, q, s):
            if candidate.key == label:
                return candidate.payload
        return None
    name, _, city = label.rpartition(", ")
    if kind_hint == "stay":
        return s.find_accommodation(name, city)
    if kind_hint == "meal":
        return s.find_restaurant(name, city)
    if kind_hint == "attraction":
        return s.find_attraction(name, city)
    return None


def apply_adjustment(it: Itinerary, adj: Adjustment, q: StructuredQuery,
                     s: RetrievedSubset) -> Itinerary | None:
    """Play one adjustment onto a copy; None when it cannot be resolved.
    Never mutates the input or the ledger."""
    kind, _, rest = adj.target.partition(":")
    if adj.kind == DROP_ATTRACTION:
        index = int(rest.split("|", 1)[0])
        day = it.day(index)
        refs = tuple(r for r in day.attractions if str(r) != adj.replacement)
        if len(refs) == len(day.attractions):
            return None
        return it.with_day(index, replace(day, attractions=refs))

    if adj.kind == SWAP_DAYS:
        i = int(rest)
        j = int(adj.replacement.split(":", 1)[1]) if adj.replacement else -1
        if not (0 <= j < len(it.days)):
            return None
        a, b = it.day(i), it.day(j)
        if is_transition(a) or is_transition(b) or day_cities(a) != day_cities(b):
            return None
        swapped_a = replace(a, breakfast=b.breakfast, lunch=b.lunch, dinner=b.dinner, attractions=b.attractions)
        swapped_b = replace(b, breakfast=a.breakfast, lunch=a.lunch, dinner=a.dinner, attractions=a.attractions)
        return it.with_day(i, swapped_a).with_day(j, swapped_b)

    if adj.kind in (REPLACE_ITEM, CHANGE_TRANSPORT_MODE):
        if adj.replacement is None:
            return None
        if kind == "transport":
            index = int(rest)
            payload = _find_payload("transport", adj.replacement, it.day(index), q, s)
            return apply_choice(it, adj.target, payload) if payload is not None else None
        if kind == "stay":
            payload = _find_payload("stay", adj.replacement, None, q, s)
            return apply_choice(it, adj.target, payload) if payload is not None else None
        if kind in MEAL_SLOTS:
            index = int(rest)
            payload = _find_payload("meal", adj.replacement, it.day(index), q, s)
            return apply_choice(it, adj.target, payload) if payload is not None else None
        if kind == "attraction":
            index_part, _, old_label = rest.partition("|")
            index = int(index_part)
            payload = _find_payload("attraction", adj.replacement, it.day(index), q, s)
            if payload is None:
                return None
            new_ref = PlaceRef(payload.name, payload.city)
            day = it.day(index)
            if old_label:
                refs = tuple(new_ref if str(r) == old_label else r for r in day.attractions)
                if refs == day.attractions:
                    return None
            else:
                refs = day.attractions + (new_ref,)
            return it.with_day(index, replace(day, attractions=refs))
    return None


# --------------------------------------------------------------------------
# The loop


def _passing_superset(before: ConstraintReport, after: ConstraintReport) -> bool:
    return before.passing_names() <= after.passing_names()


def govern(
    it: Itinerary,
    q: StructuredQuery,
    s: RetrievedSubset,
    d: SandboxDataset,
    agent: AgentHandle | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    temperature: float | None = None,
) -> tuple[Itinerary, GovernanceTrace]:
    """Run the report-check-propose-accept loop until convergence or the
    iteration cap. Acceptance requires a strictly better objective and a
    passing set that is a superset of what passed before, so the final
    objective can never exceed the initial one."""
    iterations: list[IterationRecord] = []
    current = it
    terminated = "iteration_cap"
    for _ in range(max_iterations):
        report = build_system_report(current, q, s, d)
        before = objective(report)
        proposals = tuple(propose_adjustments(report, current, q, s, agent, temperature))
        if not proposals:
            iterations.append(IterationRecord(report, (), (), before, before))
            terminated = "converged"
            break
        accepted: list[Adjustment] = []
        live_report = report
        live_objective = before
        for adj in proposals:
            trial = apply_adjustment(current, adj, q, s)
            if trial is None:
                continue
            trial_report = build_system_report(trial, q, s, d)
            trial_objective = objective(trial_report)
            if trial_objective < live_objective and _passing_superset(
                live_report.constraint_report, trial_report.constraint_report
            ):
                current = trial
                live_report = trial_report
                live_objective = trial_objective
                accepted.append(adj)
        iterations.append(IterationRecord(report, proposals, tuple(accepted), before, live_objective))
        if not accepted:
            terminated = "no_feasible_improvement"
            break
    return current, GovernanceTrace(iterations=tuple(iterations), terminated_by=terminated)
