from __future__ import annotations

from typing import Optional

from irops.model import (Aircraft, Airport, CostCoefficients, CrewGroup, Disruption, DisruptionKind, Flight,
                         Itinerary, ItineraryLeg, Maintenance, MaintenanceWindow, ProblemInstance, Slot, TimeAnchors,
                         apply_disruptions)


def make_instance(flights: list[tuple], *, airports: Optional[list[str]] = None, anchors=(0, 0, 2000, 180),
                  turnaround: int = 30, transit: int = 20, mct: int = 20, duty: int = 600,
                  aircraft_pos: Optional[dict] = None, crew_pos: Optional[dict] = None,
                  maintenances=(), slots=(), itineraries=(), disruptions=(), costs=None,
                  seats: Optional[dict] = None, name: str = "hand") -> ProblemInstance:
    """Small hand-written instance.

    ``flights`` rows are ``(id, origin, dest, dep, duration, aircraft, crew)``
    optionally followed by ``(multileg_group, leg_index)``; ``seats`` overrides
    the default (100, 10, 10) cabin sizes per flight.  Resources start
    at the origin of their first flight unless placed explicitly.
    """
    fl = []
    for row in flights:
        fid, o, d, dep, dur, ac, cr = row[:7]
        ml, leg = (row[7], row[8]) if len(row) > 7 else (None, 0)
        fl.append(Flight(fid, o, d, dep, dur, ac, cr, ml, leg, (seats or {}).get(fid, (100, 10, 10))))
    names = airports or sorted({f.origin for f in fl} | {f.destination for f in fl})
    aps = tuple(Airport(a, turnaround, transit, mct) for a in names)
    first_ac, first_cr = {}, {}
    for f in sorted(fl, key=lambda f: f.sched_departure):
        first_ac.setdefault(f.original_aircraft, f.origin)
        first_cr.setdefault(f.original_crew, f.origin)
    first_ac.update(aircraft_pos or {})
    first_cr.update(crew_pos or {})
    acs = tuple(Aircraft(a, p, 0) for a, p in sorted(first_ac.items()))
    crs = tuple(CrewGroup(c, p, 0, duty) for c, p in sorted(first_cr.items()))
    return ProblemInstance(TimeAnchors(*anchors), aps, acs, crs, tuple(fl), tuple(maintenances), tuple(slots),
                           tuple(itineraries), tuple(disruptions), costs or CostCoefficients(), name)


def delay(fid: str, minutes: int) -> Disruption:
    return Disruption(DisruptionKind.FLIGHT_DELAY, fid, minutes=minutes)


def cancel(fid: str) -> Disruption:
    return Disruption(DisruptionKind.FLIGHT_CANCELLATION, fid)


def itinerary(iid: str, count: int, *legs: str, cabin=0, cancellation=300.0, downgrade=50.0, delay_cost=1.0):
    return Itinerary(iid, count, tuple(ItineraryLeg(f, cabin) for f in legs), cancellation, downgrade, delay_cost)
