"""Domain entities, the time model and instance-level validation.

All times are integer minutes since a per-instance epoch. Windows are
half-open ``[start, end)``.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional


class CabinClass(enum.IntEnum):
    ECONOMY = 0
    PREMIUM = 1
    BUSINESS = 2

    @classmethod
    def parse(cls, value) -> "CabinClass":
        if isinstance(value, CabinClass):
            return value
        if isinstance(value, int):
            return cls(value)
        return cls[str(value).strip().upper()]

    @property
    def label(self) -> str:
        return self.name.lower()


class DisruptionKind(str, enum.Enum):
    FLIGHT_DELAY = "flight-delay"
    FLIGHT_CANCELLATION = "flight-cancellation"
    AIRCRAFT_UNAVAILABILITY = "aircraft-unavailability"
    SLOT_CHANGE = "slot-change"
    AIRPORT_CLOSURE = "airport-closure"


@dataclass(frozen=True)
class TimeAnchors:
    current_time: int
    recovery_start: int
    recovery_finish: int
    max_delay: int


@dataclass(frozen=True)
class Airport:
    id: str
    min_turnaround: int
    min_transit: int
    min_crew_connection: int


@dataclass(frozen=True)
class Flight:
    id: str
    origin: str
    destination: str
    sched_departure: int
    duration: int
    original_aircraft: str
    original_crew: str
    multileg_group: Optional[str] = None
    leg_index: int = 0
    # seats per cabin, indexed by CabinClass
    seats: tuple[int, int, int] = (0, 0, 0)

    @property
    def sched_arrival(self) -> int:
        return self.sched_departure + self.duration


@dataclass(frozen=True)
class Aircraft:
    id: str
    initial_position: str
    available_from: int


@dataclass(frozen=True)
class CrewGroup:
    id: str
    initial_position: str
    available_from: int
    flight_time_limit: int


@dataclass(frozen=True)
class MaintenanceWindow:
    airport: str
    earliest_start: int
    latest_start: int


@dataclass(frozen=True)
class Maintenance:
    id: str
    aircraft: str
    duration: int
    allowed_windows: tuple[MaintenanceWindow, ...]
    fail_penalty: float
    # placement in the original plan; defaults to the first window's earliest start
    planned_airport: Optional[str] = None
    planned_start: Optional[int] = None

    @property
    def planned(self) -> tuple[str, int]:
        if self.planned_airport is not None and self.planned_start is not None:
            return self.planned_airport, self.planned_start
        w = self.allowed_windows[0]
        return w.airport, w.earliest_start

    def allows(self, airport: str, start: int) -> bool:
        return any(w.airport == airport and w.earliest_start <= start <= w.latest_start
                   for w in self.allowed_windows)

    @property
    def latest_start(self) -> int:
        return max(w.latest_start for w in self.allowed_windows)


@dataclass(frozen=True)
class Slot:
    id: str
    airport: str
    start: int
    end: int
    capacity: int
    nonuse_penalty: float = 0.0

    def contains(self, airport: str, t: int) -> bool:
        return airport == self.airport and self.start <= t < self.end


class SlotIndex:
    """Finds the slots whose window holds a departure, per airport."""

    def __init__(self, slots: Iterable[Slot]):
        self._by_ap: dict[str, list[Slot]] = {}
        for sl in slots:
            self._by_ap.setdefault(sl.airport, []).append(sl)
        self._starts: dict[str, list[int]] = {}
        self._span: dict[str, int] = {}
        for ap, lst in self._by_ap.items():
            lst.sort(key=lambda sl: (sl.start, sl.id))
            self._starts[ap] = [sl.start for sl in lst]
            self._span[ap] = max(sl.end - sl.start for sl in lst)

    def covering(self, airport: str, t: int) -> list[Slot]:
        lst = self._by_ap.get(airport)
        if not lst:
            return []
        hi = bisect.bisect_right(self._starts[airport], t)
        out = []
        k = hi - 1
        while k >= 0 and lst[k].start > t - self._span[airport]:
            if lst[k].contains(airport, t):
                out.append(lst[k])
            k -= 1
        return out[::-1]


@dataclass(frozen=True)
class ItineraryLeg:
    flight: str
    cabin: CabinClass = CabinClass.ECONOMY


@dataclass(frozen=True)
class Itinerary:
    id: str
    passenger_count: int
    legs: tuple[ItineraryLeg, ...]
    cancellation_cost: float
    downgrade_cost: float
    delay_cost: float


@dataclass(frozen=True)
class Disruption:
    kind: DisruptionKind
    target: str
    # kind-specific: minutes | start, end | capacity
    minutes: Optional[int] = None
    start: Optional[int] = None
    end: Optional[int] = None
    capacity: Optional[int] = None


@dataclass(frozen=True)
class CostCoefficients:
    delay_per_minute: float = 10.0
    cancellation_per_flight: float = 5000.0
    # tie-breaker keeping resources on their planned rotations
    swap_cost: float = 25.0
    pax_cancellation: float = 300.0
    pax_downgrade: float = 50.0
    pax_delay_per_minute: float = 1.0


@dataclass(frozen=True)
class ProblemInstance:
    anchors: TimeAnchors
    airports: tuple[Airport, ...]
    aircraft: tuple[Aircraft, ...]
    crew_groups: tuple[CrewGroup, ...]
    flights: tuple[Flight, ...]
    maintenances: tuple[Maintenance, ...] = ()
    slots: tuple[Slot, ...] = ()
    itineraries: tuple[Itinerary, ...] = ()
    disruptions: tuple[Disruption, ...] = ()
    costs: CostCoefficients = field(default_factory=CostCoefficients)
    name: str = "instance"

    @cached_property
    def airport(self) -> dict[str, Airport]:
        return {a.id: a for a in self.airports}

    @cached_property
    def flight(self) -> dict[str, Flight]:
        return {f.id: f for f in self.flights}

    @cached_property
    def aircraft_by_id(self) -> dict[str, Aircraft]:
        return {a.id: a for a in self.aircraft}

    @cached_property
    def crew(self) -> dict[str, CrewGroup]:
        return {c.id: c for c in self.crew_groups}

    @cached_property
    def maintenance(self) -> dict[str, Maintenance]:
        return {m.id: m for m in self.maintenances}

    @cached_property
    def slot(self) -> dict[str, Slot]:
        return {s.id: s for s in self.slots}

    @cached_property
    def multileg_groups(self) -> dict[str, tuple[Flight, ...]]:
        groups: dict[str, list[Flight]] = {}
        for f in self.flights:
            if f.multileg_group is not None:
                groups.setdefault(f.multileg_group, []).append(f)
        return {g: tuple(sorted(legs, key=lambda f: f.leg_index)) for g, legs in sorted(groups.items())}

    def counts(self) -> dict[str, int]:
        return {
            "airports": len(self.airports),
            "slotted_airports": len({s.airport for s in self.slots}),
            "aircraft": len(self.aircraft),
            "crew_groups": len(self.crew_groups),
            "flights": len(self.flights),
            "passengers": sum(i.passenger_count for i in self.itineraries),
            "multileg": len(self.multileg_groups),
            "flight_disruptions": sum(1 for d in self.disruptions
                                      if d.kind in (DisruptionKind.FLIGHT_DELAY, DisruptionKind.FLIGHT_CANCELLATION)),
            "maintenances": len(self.maintenances),
            "slots": len(self.slots),
        }


@dataclass(frozen=True)
class Diagnostic:
    entity: str
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.entity}.{self.field}: {self.rule}"


def validate_instance(instance: ProblemInstance) -> list[Diagnostic]:
    """Check every type invariant and cross-reference; return the violations."""
    out: list[Diagnostic] = []

    def bad(entity, fld, rule):
        out.append(Diagnostic(entity, fld, rule))

    a = instance.anchors
    if not a.current_time <= a.recovery_start:
        bad("anchors", "recovery_start", "current_time must not exceed recovery_start")
    if not a.recovery_start < a.recovery_finish:
        bad("anchors", "recovery_finish", "recovery_start must precede recovery_finish")
    if a.max_delay <= 0:
        bad("anchors", "max_delay", "max_delay must be positive")

    for kind, items in (("airport", instance.airports), ("aircraft", instance.aircraft),
                        ("crew", instance.crew_groups), ("flight", instance.flights),
                        ("maintenance", instance.maintenances), ("slot", instance.slots),
                        ("itinerary", instance.itineraries)):
        seen = set()
        for item in items:
            if item.id in seen:
                bad(item.id, "id", f"duplicate {kind} id")
            seen.add(item.id)

    for ap in instance.airports:
        if ap.min_crew_connection <= 0:
            bad(ap.id, "min_crew_connection",
                "must be > 0: disembark arcs join the ground thread at the arrival instant")
        if ap.min_turnaround < 0 or ap.min_transit < 0:
            bad(ap.id, "min_turnaround", "ground times must be nonnegative")

    airports = instance.airport
    for ac in instance.aircraft:
        if ac.initial_position not in airports:
            bad(ac.id, "initial_position", "unknown airport")
    for cg in instance.crew_groups:
        if cg.initial_position not in airports:
            bad(cg.id, "initial_position", "unknown airport")
        if cg.flight_time_limit <= 0:
            bad(cg.id, "flight_time_limit", "must be positive")

    for f in instance.flights:
        if f.duration <= 0:
            bad(f.id, "duration", "must be positive")
        if f.origin == f.destination:
            bad(f.id, "destination", "origin and destination must differ")
        for fld in ("origin", "destination"):
            if getattr(f, fld) not in airports:
                bad(f.id, fld, "unknown airport")
        if f.original_aircraft not in instance.aircraft_by_id:
            bad(f.id, "original_aircraft", "unknown aircraft")
        if f.original_crew not in instance.crew:
            bad(f.id, "original_crew", "unknown crew group")
        if len(f.seats) != len(CabinClass) or any(s < 0 for s in f.seats):
            bad(f.id, "seats", "one nonnegative count per cabin class")

    for gid, legs in instance.multileg_groups.items():
        if len(legs) < 2:
            bad(gid, "legs", "multileg group needs at least two legs")
        if [f.leg_index for f in legs] != list(range(len(legs))):
            bad(gid, "leg_index", "leg indices must be 0..n-1")
        for prev, nxt in zip(legs, legs[1:]):
            if prev.destination != nxt.origin:
                bad(gid, "legs", f"{prev.id} does not chain into {nxt.id}")
            if prev.sched_arrival > nxt.sched_departure:
                bad(gid, "legs", f"legs {prev.id} and {nxt.id} are out of time order")
            if (prev.original_aircraft, prev.original_crew) != (nxt.original_aircraft, nxt.original_crew):
                bad(gid, "legs", "legs must share aircraft and crew")

    max_cancel = max([instance.costs.cancellation_per_flight], default=0.0)
    for m in instance.maintenances:
        if m.aircraft not in instance.aircraft_by_id:
            bad(m.id, "aircraft", "unknown aircraft")
        if m.duration <= 0:
            bad(m.id, "duration", "must be positive")
        if not m.allowed_windows:
            bad(m.id, "allowed_windows", "at least one window required")
        for w in m.allowed_windows:
            if w.airport not in airports:
                bad(m.id, "allowed_windows", f"unknown airport {w.airport}")
            if w.earliest_start > w.latest_start:
                bad(m.id, "allowed_windows", "earliest_start after latest_start")
        if m.fail_penalty <= max_cancel:
            bad(m.id, "fail_penalty", "must exceed any single flight cancellation cost")
        if m.planned_airport is not None and m.allowed_windows and not m.allows(*m.planned):
            bad(m.id, "planned_start", "planned placement outside allowed windows")

    for s in instance.slots:
        if s.airport not in airports:
            bad(s.id, "airport", "unknown airport")
        if s.capacity < 0:
            bad(s.id, "capacity", "must be nonnegative")
        if not s.start < s.end:
            bad(s.id, "window", "start must precede end")

    flights = instance.flight
    for it in instance.itineraries:
        if it.passenger_count <= 0:
            bad(it.id, "passenger_count", "must be positive")
        if not it.legs:
            bad(it.id, "legs", "at least one leg required")
        if any(leg.flight not in flights for leg in it.legs):
            bad(it.id, "legs", "unknown flight")
            continue
        for prev, nxt in zip(it.legs, it.legs[1:]):
            fp, fn = flights[prev.flight], flights[nxt.flight]
            if fp.destination != fn.origin:
                bad(it.id, "legs", f"{fp.id} does not chain into {fn.id}")
            elif fp.sched_arrival > fn.sched_departure:
                bad(it.id, "legs", f"connection {fp.id}->{fn.id} goes back in time")

    for i, d in enumerate(instance.disruptions):
        ref = f"disruption[{i}]"
        k = d.kind
        if k in (DisruptionKind.FLIGHT_DELAY, DisruptionKind.FLIGHT_CANCELLATION):
            if d.target not in flights:
                bad(ref, "target", "unknown flight")
            if k is DisruptionKind.FLIGHT_DELAY and (d.minutes is None or d.minutes <= 0):
                bad(ref, "minutes", "delay needs positive minutes")
        elif k is DisruptionKind.AIRCRAFT_UNAVAILABILITY:
            if d.target not in instance.aircraft_by_id:
                bad(ref, "target", "unknown aircraft")
            if d.start is None or d.end is None or d.start >= d.end:
                bad(ref, "window", "needs start < end")
        elif k is DisruptionKind.AIRPORT_CLOSURE:
            if d.target not in airports:
                bad(ref, "target", "unknown airport")
            if d.start is None or d.end is None or d.start >= d.end:
                bad(ref, "window", "needs start < end")
        elif k is DisruptionKind.SLOT_CHANGE:
            if d.target not in instance.slot:
                bad(ref, "target", "unknown slot")
            if d.capacity is None or d.capacity < 0:
                bad(ref, "capacity", "needs nonnegative capacity")
    return out


# --------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class FlightPlan:
    departure: int
    aircraft: str
    crew: str


@dataclass(frozen=True)
class MaintPlan:
    airport: str
    start: int


@dataclass
class RecoverySchedule:
    """Per-flight and per-maintenance dispositions.

    ``None`` marks a canceled flight or a failed maintenance.
    """

    flights: dict[str, Optional[FlightPlan]]
    maintenances: dict[str, Optional[MaintPlan]] = field(default_factory=dict)
    objective: float = 0.0
    iteration_log: list[dict] = field(default_factory=list)

    def same_plan(self, other: "RecoverySchedule") -> bool:
        return self.flights == other.flights and self.maintenances == other.maintenances

    def copy(self) -> "RecoverySchedule":
        return RecoverySchedule(dict(self.flights), dict(self.maintenances), self.objective,
                                list(self.iteration_log))

    def canceled(self) -> list[str]:
        return sorted(f for f, p in self.flights.items() if p is None)


# --------------------------------------------------------------------------
# disrupted state


@dataclass(frozen=True)
class StartPoint:
    """Where a resource enters the recovery horizon."""

    airport: str
    time: int
    # crew only: already aboard this aircraft
    aboard: Optional[str] = None


def _overlaps(a0: int, a1: int, b0: int, b1: int) -> bool:
    return a0 < b1 and b0 < a1


@dataclass
class DisruptedState:
    instance: ProblemInstance
    original: RecoverySchedule
    baseline: RecoverySchedule
    disrupted: frozenset[str]
    removed: frozenset[str]
    immutable: frozenset[str]
    unavailable: dict[str, tuple[tuple[int, int], ...]]
    closures: dict[str, tuple[tuple[int, int], ...]]
    slots: tuple[Slot, ...]
    aircraft_start: dict[str, StartPoint]
    crew_start: dict[str, StartPoint]
    crew_flown: dict[str, int]

    @property
    def anchors(self) -> TimeAnchors:
        return self.instance.anchors

    @property
    def costs(self) -> CostCoefficients:
        return self.instance.costs

    def base_departure(self, fid: str) -> int:
        plan = self.baseline.flights[fid]
        return plan.departure if plan is not None else self.instance.flight[fid].sched_departure

    def decision_flights(self) -> list[str]:
        """Flights the recovery may change, in baseline departure order."""
        fids = [f.id for f in self.instance.flights if f.id not in self.immutable and f.id not in self.removed]
        return sorted(fids, key=lambda f: (self.base_departure(f), f))

    def departure_ok(self, fid: str, dep: int) -> bool:
        """Time-anchor rules for a scheduled departure of a decision flight."""
        a = self.anchors
        base = self.base_departure(fid)
        if dep == base:
            return True
        return max(base, a.recovery_start) <= dep <= min(base + a.max_delay, a.recovery_finish)

    def ground_time(self, airport: str, arriving: Flight, departing: Optional[Flight] = None) -> int:
        """Aircraft ground time after ``arriving`` lands, before ``departing`` leaves."""
        ap = self.instance.airport[airport]
        if (departing is not None and arriving.multileg_group is not None
                and arriving.multileg_group == departing.multileg_group
                and departing.leg_index == arriving.leg_index + 1):
            return ap.min_transit
        return ap.min_turnaround

    def inner_leg(self, f: Flight) -> tuple[bool, bool]:
        """(arrives into a multileg transit, departs from a multileg transit)."""
        if f.multileg_group is None:
            return False, False
        n = len(self.instance.multileg_groups[f.multileg_group])
        return f.leg_index < n - 1, f.leg_index > 0

    def resource_legal(self, fid: str, dep: int, aircraft: str) -> bool:
        """Unavailability and closure rules for a departure on an aircraft."""
        f = self.instance.flight[fid]
        arr = dep + f.duration
        for s, e in self.unavailable.get(aircraft, ()):
            if _overlaps(dep, arr, s, e):
                return False
        for s, e in self.closures.get(f.origin, ()):
            if s <= dep < e:
                return False
        for s, e in self.closures.get(f.destination, ()):
            if s <= arr < e:
                return False
        return True


def original_schedule(instance: ProblemInstance) -> RecoverySchedule:
    flights = {f.id: FlightPlan(f.sched_departure, f.original_aircraft, f.original_crew)
               for f in instance.flights}
    maints = {m.id: MaintPlan(*m.planned) for m in instance.maintenances}
    return RecoverySchedule(flights, maints)


def apply_disruptions(instance: ProblemInstance) -> DisruptedState:
    """Fold the instance's disruptions into its original plan.

    Raises ``KeyError`` for a disruption whose target does not exist.
    """
    original = original_schedule(instance)
    flights = dict(original.flights)
    a = instance.anchors
    disrupted: set[str] = set()
    removed: set[str] = set()
    unavailable: dict[str, list[tuple[int, int]]] = {}
    closures: dict[str, list[tuple[int, int]]] = {}
    slots = {s.id: s for s in instance.slots}

    for d in instance.disruptions:
        k = DisruptionKind(d.kind)
        if k is DisruptionKind.FLIGHT_DELAY:
            plan = flights[_require(instance.flight, d.target)]
            if plan is not None:
                flights[d.target] = replace(plan, departure=plan.departure + int(d.minutes))
            disrupted.add(d.target)
        elif k is DisruptionKind.FLIGHT_CANCELLATION:
            _require(instance.flight, d.target)
            flights[d.target] = None
            removed.add(d.target)
            disrupted.add(d.target)
        elif k is DisruptionKind.AIRCRAFT_UNAVAILABILITY:
            _require(instance.aircraft_by_id, d.target)
            unavailable.setdefault(d.target, []).append((int(d.start), int(d.end)))
        elif k is DisruptionKind.AIRPORT_CLOSURE:
            _require(instance.airport, d.target)
            closures.setdefault(d.target, []).append((int(d.start), int(d.end)))
            for sid, s in slots.items():
                if s.airport == d.target and d.start <= s.start and s.end <= d.end:
                    slots[sid] = replace(s, capacity=0)
        elif k is DisruptionKind.SLOT_CHANGE:
            s = slots[_require(instance.slot, d.target)]
            slots[d.target] = replace(
                s, capacity=int(d.capacity),
                start=s.start if d.start is None else int(d.start),
                end=s.end if d.end is None else int(d.end))

    # flights touched by groundings or closures
    for f in instance.flights:
        plan = flights[f.id]
        if plan is None:
            continue
        arr = plan.departure + f.duration
        for s, e in unavailable.get(plan.aircraft, ()):
            if _overlaps(plan.departure, arr, s, e):
                disrupted.add(f.id)
        for s, e in closures.get(f.origin, ()):
            if s <= plan.departure < e:
                disrupted.add(f.id)
        for s, e in closures.get(f.destination, ()):
            if s <= arr < e:
                disrupted.add(f.id)

    # past and beyond-horizon flights are frozen; multileg groups freeze as a unit
    immutable = {f.id for f in instance.flights
                 if flights[f.id] is not None and
                 (flights[f.id].departure < a.current_time or flights[f.id].departure > a.recovery_finish)}
    for legs in instance.multileg_groups.values():
        if any(leg.id in immutable for leg in legs):
            immutable.update(leg.id for leg in legs if flights[leg.id] is not None)

    baseline = RecoverySchedule(flights, dict(original.maintenances))

    aircraft_start: dict[str, StartPoint] = {}
    crew_start: dict[str, StartPoint] = {}
    crew_flown: dict[str, int] = {c.id: 0 for c in instance.crew_groups}
    # frozen flights inside the horizon (past ones, plus the later legs of a multileg
    # group already under way) determine where each resource enters the recovery
    past = sorted((f for f in instance.flights if f.id in immutable and flights[f.id].departure <= a.recovery_finish),
                  key=lambda f: flights[f.id].departure)
    for ac in instance.aircraft:
        aircraft_start[ac.id] = StartPoint(ac.initial_position, ac.available_from)
    for cg in instance.crew_groups:
        crew_start[cg.id] = StartPoint(cg.initial_position, cg.available_from)
    for f in past:
        plan = flights[f.id]
        arr = plan.departure + f.duration
        turn = instance.airport[f.destination].min_turnaround
        aircraft_start[plan.aircraft] = StartPoint(f.destination, arr + turn)
        crew_start[plan.crew] = StartPoint(f.destination, arr, aboard=plan.aircraft)
        crew_flown[plan.crew] += f.duration

    return DisruptedState(
        instance=instance,
        original=original,
        baseline=baseline,
        disrupted=frozenset(disrupted),
        removed=frozenset(removed),
        immutable=frozenset(immutable),
        unavailable={k: tuple(v) for k, v in unavailable.items()},
        closures={k: tuple(v) for k, v in closures.items()},
        slots=tuple(slots[s.id] for s in instance.slots),
        aircraft_start=aircraft_start,
        crew_start=crew_start,
        crew_flown=crew_flown,
    )


def _require(mapping, key):
    if key not in mapping:
        raise KeyError(f"disruption targets unknown id {key!r}")
    return key


def rotations(schedule: RecoverySchedule, instance: ProblemInstance,
              flights: Optional[Iterable[str]] = None) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
    """Scheduled flights per aircraft and per crew, in departure order."""
    by_ac: dict[str, list[str]] = {a.id: [] for a in instance.aircraft}
    by_crew: dict[str, list[str]] = {c.id: [] for c in instance.crew_groups}
    ids = schedule.flights.keys() if flights is None else flights
    for fid in ids:
        plan = schedule.flights.get(fid)
        if plan is None:
            continue
        by_ac.setdefault(plan.aircraft, []).append(fid)
        by_crew.setdefault(plan.crew, []).append(fid)
    flight = instance.flight

    def key(fid):
        f = flight[fid]
        return schedule.flights[fid].departure, f.multileg_group or "", f.leg_index, fid

    for seq in by_ac.values():
        seq.sort(key=key)
    for seq in by_crew.values():
        seq.sort(key=key)
    return by_ac, by_crew


# --------------------------------------------------------------------------
# passenger assignment


@dataclass(frozen=True)
class PaxGroup:
    """Passengers of one itinerary travelling together on one path."""

    count: int
    segments: tuple[tuple[str, CabinClass], ...]
    delivered: bool = True


@dataclass
class PassengerAssignment:
    groups: dict[str, tuple[PaxGroup, ...]]
    cost: float = 0.0

    def delivered(self, itinerary_id: str) -> int:
        return sum(g.count for g in self.groups.get(itinerary_id, ()) if g.delivered)

    def loads(self) -> dict[tuple[str, CabinClass], int]:
        out: dict[tuple[str, CabinClass], int] = {}
        for groups in self.groups.values():
            for g in groups:
                for fid, cabin in g.segments:
                    out[(fid, cabin)] = out.get((fid, cabin), 0) + g.count
        return out


def baseline_assignment(instance: ProblemInstance) -> PassengerAssignment:
    """Every passenger on the originally booked legs and cabins."""
    groups = {it.id: (PaxGroup(it.passenger_count, tuple((leg.flight, leg.cabin) for leg in it.legs)),)
              for it in instance.itineraries}
    return PassengerAssignment(groups)
