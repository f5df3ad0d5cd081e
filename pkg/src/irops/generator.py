"""Deterministic synthetic instances on a hub-and-spoke network.

Aircraft fly alternating hub/spoke legs, so every rotation is consistent by
construction. Crews follow their aircraft and may hand over at a hub; a
multileg flight is a spoke-hub-spoke pair flown with transit time between
the legs. Slots are sized from the undisrupted departures, itineraries stay
below seat capacity, and disruptions are sampled last.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Optional

from .model import (
    Aircraft,
    Airport,
    CabinClass,
    CostCoefficients,
    CrewGroup,
    Disruption,
    DisruptionKind,
    Flight,
    Itinerary,
    ItineraryLeg,
    Maintenance,
    MaintenanceWindow,
    ProblemInstance,
    Slot,
    TimeAnchors,
    validate_instance,
)

DEFAULT_MIX = (
    ("flight-delay", 0.6),
    ("flight-cancellation", 0.1),
    ("aircraft-unavailability", 0.15),
    ("slot-change", 0.1),
    ("airport-closure", 0.05),
)


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 1
    airports: int = 6
    hubs: int = 1
    slotted_airports: Optional[int] = None  # defaults to the hubs
    aircraft: int = 3
    crew_groups: Optional[int] = None  # defaults to 1.5 per aircraft
    flights: int = 12
    multileg: int = 0
    maintenances: int = 0
    slots: Optional[int] = None  # None: every window at every slotted airport
    slot_minutes: int = 60
    slot_capacity: Optional[int] = None  # hard per-slot cap; exceeding it is an error
    slot_penalty: float = 150.0
    itineraries: Optional[int] = None  # defaults to two per flight
    load_factor: float = 0.75
    connection_share: float = 0.3
    disruptions: int = 2
    disruption_mix: tuple[tuple[str, float], ...] = DEFAULT_MIX
    day_start: int = 360
    current_time_offset: int = 0
    recovery_lead: int = 0
    max_delay: int = 180
    costs: CostCoefficients = field(default_factory=CostCoefficients)
    name: Optional[str] = None


TIERS: dict[str, GeneratorConfig] = {
    "tiny": GeneratorConfig(airports=4, aircraft=2, crew_groups=3, flights=6, disruptions=1),
    "small": GeneratorConfig(airports=6, aircraft=3, crew_groups=5, flights=12, multileg=1,
                             maintenances=1, disruptions=2),
    "medium": GeneratorConfig(airports=10, aircraft=6, crew_groups=10, flights=30, multileg=1,
                              maintenances=1, disruptions=4, slotted_airports=2),
    "large": GeneratorConfig(airports=35, hubs=3, slotted_airports=25, aircraft=85, crew_groups=162,
                             flights=608, multileg=4, maintenances=3, slots=1478, slot_minutes=20,
                             itineraries=1824, disruptions=63,
                             disruption_mix=(("flight-delay", 0.85), ("flight-cancellation", 0.15))),
    # half-empty aircraft and disruptions that strand passengers: room for rerouting to matter
    "slack": GeneratorConfig(airports=8, aircraft=5, crew_groups=8, flights=25, multileg=1,
                             maintenances=1, disruptions=4, load_factor=0.5, connection_share=0.4,
                             disruption_mix=(("flight-delay", 0.5), ("flight-cancellation", 0.25),
                                             ("aircraft-unavailability", 0.25))),
}


def tier_config(tier: str, seed: int = 1, **overrides) -> GeneratorConfig:
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}; choose from {sorted(TIERS)}")
    return replace(TIERS[tier], seed=seed, name=f"{tier}-{seed}", **overrides)


def _step(rng: random.Random, lo: int, hi: int, step: int = 5) -> int:
    return rng.randrange(lo // step, hi // step + 1) * step


def generate_instance(config: GeneratorConfig) -> ProblemInstance:
    """Build an instance; the same config always yields the same instance.

    Raises ``ValueError`` when the requested shape cannot be satisfied.
    """
    c = config
    _check_shape(c)
    rng = random.Random(c.seed)

    # airports: hubs first, each spoke hangs off one hub
    airports = []
    for i in range(c.airports):
        airports.append(Airport(f"AP{i:02d}", _step(rng, 30, 45), _step(rng, 15, 25), _step(rng, 20, 30)))
    hubs = [a.id for a in airports[:c.hubs]]
    spokes = [a.id for a in airports[c.hubs:]]
    spoke_hub = {s: hubs[i % c.hubs] for i, s in enumerate(spokes)}
    spoke_dur = {s: _step(rng, 50, 150) for s in spokes}
    ap = {a.id: a for a in airports}

    # flights per aircraft, multileg pairs need at least three legs on an aircraft
    per_ac = [c.flights // c.aircraft + (1 if i < c.flights % c.aircraft else 0) for i in range(c.aircraft)]
    ml_owner = [i for i in range(c.aircraft) if per_ac[i] >= 3][: c.multileg]

    flights: list[Flight] = []
    rot: dict[str, list[int]] = {}
    aircraft = []
    ml_count = 0
    for i, n in enumerate(per_ac):
        ac = f"AC{i + 1:03d}"
        hub = hubs[i % c.hubs]
        own_spokes = [s for s in spokes if spoke_hub[s] == hub] or spokes
        t = c.day_start + _step(rng, 60, 180)
        aircraft.append(Aircraft(ac, hub, c.day_start))
        ml_at = None
        if i in ml_owner:
            ml_at = 1  # legs 1 and 2: spoke -> hub -> spoke
        pos, spoke = hub, None
        rot[ac] = []
        for k in range(n):
            if pos == hub:
                spoke = rng.choice(own_spokes)
                dest, dur = spoke, spoke_dur[spoke]
            else:
                dest, dur = spoke_hub[pos], spoke_dur[pos]
            group = leg = None
            if ml_at is not None and k in (ml_at, ml_at + 1):
                group, leg = f"ML{ml_count + 1:02d}", k - ml_at
            seats = (_step(rng, 100, 180, 10), rng.choice((0, 12, 18, 24)), _step(rng, 8, 16, 4))
            fid = f"FL{len(flights) + 1:04d}"
            flights.append(Flight(fid, pos, dest, t, dur, ac, "", group, leg or 0, seats))
            rot[ac].append(len(flights) - 1)
            arr = t + dur
            if group is not None and leg == 0:
                t = arr + ap[dest].min_transit + _step(rng, 0, 10)
            else:
                t = arr + ap[dest].min_turnaround + _step(rng, 0, 40)
            pos = dest
        if ml_at is not None:
            ml_count += 1

    # crews: one per aircraft, a second one taking over at a hub where possible
    n_crews = c.crew_groups if c.crew_groups is not None else c.aircraft + (c.aircraft + 1) // 2
    extra = n_crews - c.aircraft
    crews: list[CrewGroup] = []
    crew_of: dict[int, str] = {}
    for i, ac in enumerate(a.id for a in aircraft):
        idx = rot[ac]
        cuts = [k for k in range(2, len(idx), 2)
                if not (flights[idx[k]].multileg_group and flights[idx[k]].leg_index > 0)]
        parts = [idx]
        if extra > 0 and cuts:
            cut = cuts[len(cuts) // 2]
            parts = [idx[:cut], idx[cut:]]
            extra -= 1
        for part in parts:
            cid = f"CR{len(crews) + 1:03d}"
            first = flights[part[0]]
            flown = sum(flights[j].duration for j in part)
            limit = max(flown + 60, int(flown * (1.15 + 0.35 * rng.random()) // 30 + 1) * 30)
            crews.append(CrewGroup(cid, first.origin, c.day_start, limit))
            for j in part:
                crew_of[j] = cid
    for k in range(extra):
        crews.append(CrewGroup(f"CR{len(crews) + 1:03d}", hubs[k % c.hubs], c.day_start, 480))
    flights = [replace(f, original_crew=crew_of[j]) for j, f in enumerate(flights)]

    # maintenance at the end of selected rotations
    maints = []
    mx_ac = sorted(rng.sample(range(c.aircraft), c.maintenances))
    for n, i in enumerate(mx_ac):
        last = flights[rot[aircraft[i].id][-1]]
        ready = last.sched_arrival + ap[last.destination].min_turnaround
        early = ready + _step(rng, 0, 60)
        late = early + _step(rng, 60, 180)
        win = MaintenanceWindow(last.destination, early, late)
        maints.append(Maintenance(f"MX{n + 1:02d}", aircraft[i].id, _step(rng, 60, 240, 15), (win,),
                                  c.costs.cancellation_per_flight * 4, last.destination, early))

    slots = _make_slots(c, rng, hubs, spokes, flights)
    itins = _make_itineraries(c, rng, flights, ap, hubs)

    last_arr = max(f.sched_arrival for f in flights)
    ct = c.day_start + c.current_time_offset
    anchors = TimeAnchors(ct, ct + c.recovery_lead, last_arr + c.max_delay + 240, c.max_delay)
    disruptions = _make_disruptions(c, rng, anchors, flights, aircraft, slots, spokes)

    inst = ProblemInstance(anchors, tuple(airports), tuple(aircraft), tuple(crews), tuple(flights),
                           tuple(maints), tuple(slots), tuple(itins), tuple(disruptions), c.costs,
                           c.name or f"generated-{c.seed}")
    diags = validate_instance(inst)
    if diags:
        raise RuntimeError("generator produced an invalid instance: " + "; ".join(map(str, diags)))
    return inst


def _check_shape(c: GeneratorConfig) -> None:
    if min(c.airports, c.aircraft, c.flights, c.hubs) <= 0:
        raise ValueError("airport, hub, aircraft and flight counts must be positive")
    if c.airports <= c.hubs:
        raise ValueError("need at least one spoke airport besides the hubs")
    if c.flights < c.aircraft:
        raise ValueError("every aircraft needs at least one flight")
    if c.crew_groups is not None and c.crew_groups < c.aircraft:
        raise ValueError("need at least one crew group per aircraft")
    if c.maintenances > c.aircraft:
        raise ValueError("at most one maintenance per aircraft")
    per_ac_min = c.flights // c.aircraft
    capable = sum(1 for i in range(c.aircraft)
                  if per_ac_min + (1 if i < c.flights % c.aircraft else 0) >= 3)
    if c.multileg > capable:
        raise ValueError(f"{c.multileg} multileg flights requested but only {capable} rotations can hold one")
    if c.slotted_airports is not None and c.slotted_airports > c.airports:
        raise ValueError("more slotted airports than airports")
    if c.disruptions < 0 or c.max_delay <= 0:
        raise ValueError("disruptions must be >= 0 and max_delay > 0")


def _make_slots(c, rng, hubs, spokes, flights) -> list[Slot]:
    n_slotted = c.slotted_airports if c.slotted_airports is not None else len(hubs)
    slotted = hubs[:n_slotted] + sorted(rng.sample(spokes, max(0, n_slotted - len(hubs))))
    w = c.slot_minutes
    first = min(f.sched_departure for f in flights) // w * w
    # windows also cover the delay horizon so delayed departures can be counted
    last = max(f.sched_departure for f in flights) + c.max_delay
    windows = [(a, t) for a in slotted for t in range(first, last + 1, w)]
    if c.slots is not None:
        if c.slots > len(windows):
            raise ValueError(f"{c.slots} slots requested but only {len(windows)} windows exist")
        windows = sorted(rng.sample(windows, c.slots), key=lambda x: (slotted.index(x[0]), x[1]))
    slots = []
    for a, t in windows:
        used = sum(1 for f in flights if f.origin == a and t <= f.sched_departure < t + w)
        if c.slot_capacity is not None and used > c.slot_capacity:
            raise ValueError(f"{used} departures at {a} in [{t}, {t + w}) exceed slot capacity {c.slot_capacity}")
        cap = used + rng.choice((0, 1))
        if c.slot_capacity is not None:
            cap = min(cap, c.slot_capacity)
        penalty = c.slot_penalty if used > 0 and cap == used else 0.0
        slots.append(Slot(f"SL{len(slots) + 1:04d}", a, t, t + w, cap, penalty))
    return slots


def _make_itineraries(c, rng, flights, ap, hubs) -> list[Itinerary]:
    room = {(f.id, cab): int(f.seats[cab] * c.load_factor) for f in flights for cab in CabinClass}
    target = c.itineraries if c.itineraries is not None else 2 * len(flights)
    n_conn = int(target * c.connection_share)
    by_origin: dict[str, list[Flight]] = {}
    for f in flights:
        by_origin.setdefault(f.origin, []).append(f)
    inbound = [f for f in flights if f.destination in hubs]
    out = []

    def book(legs):
        cab = rng.choices(list(CabinClass), weights=(85, 10, 5))[0]
        if any(room[(f.id, cab)] <= 0 for f in legs):
            cab = CabinClass.ECONOMY
        free = min(room[(f.id, cab)] for f in legs)
        if free <= 0:
            return
        n = min(free, rng.randint(3, 40) if cab == CabinClass.ECONOMY else rng.randint(1, 6))
        for f in legs:
            room[(f.id, cab)] -= n
        out.append(Itinerary(f"IT{len(out) + 1:05d}", n, tuple(ItineraryLeg(f.id, cab) for f in legs),
                             c.costs.pax_cancellation, c.costs.pax_downgrade, c.costs.pax_delay_per_minute))

    for _ in range(n_conn * 3):
        if len(out) >= n_conn or not inbound:
            break
        f = rng.choice(inbound)
        mct = ap[f.destination].min_transit
        onward = [g for g in by_origin.get(f.destination, [])
                  if g.destination != f.origin and f.sched_arrival + mct <= g.sched_departure <= f.sched_arrival + 240]
        if onward:
            book([f, rng.choice(onward)])
    for _ in range(target * 3):
        if len(out) >= target:
            break
        book([rng.choice(flights)])
    return out


def _make_disruptions(c, rng, anchors, flights, aircraft, slots, spokes) -> list[Disruption]:
    kinds = [DisruptionKind(k) for k, _ in c.disruption_mix]
    weights = [w for _, w in c.disruption_mix]
    open_flights = [f for f in flights if f.sched_departure >= anchors.current_time]
    used: set[str] = set()
    out = []
    for _ in range(c.disruptions):
        kind = rng.choices(kinds, weights=weights)[0]
        pool = [f for f in open_flights if f.id not in used]
        if kind is DisruptionKind.FLIGHT_CANCELLATION:
            pool = [f for f in pool if f.multileg_group is None]
        if kind is DisruptionKind.SLOT_CHANGE and not any(s.capacity > 0 for s in slots):
            kind = DisruptionKind.FLIGHT_DELAY
        if kind in (DisruptionKind.FLIGHT_DELAY, DisruptionKind.FLIGHT_CANCELLATION):
            if not pool:
                continue
            f = rng.choice(pool)
            used.add(f.id)
            if kind is DisruptionKind.FLIGHT_DELAY:
                out.append(Disruption(kind, f.id, minutes=_step(rng, 15, min(120, c.max_delay))))
            else:
                out.append(Disruption(kind, f.id))
        elif kind is DisruptionKind.AIRCRAFT_UNAVAILABILITY:
            ac = rng.choice(aircraft).id
            deps = [f.sched_departure for f in open_flights if f.original_aircraft == ac] or [anchors.current_time]
            start = rng.choice(deps) - 30
            out.append(Disruption(kind, ac, start=start, end=start + _step(rng, 60, 180)))
        elif kind is DisruptionKind.SLOT_CHANGE:
            s = rng.choice([s for s in slots if s.capacity > 0])
            out.append(Disruption(kind, s.id, capacity=s.capacity - 1))
        else:
            a = rng.choice(spokes)
            start = _step(rng, anchors.current_time, anchors.current_time + 600)
            out.append(Disruption(kind, a, start=start, end=start + _step(rng, 30, 90)))
    return out
