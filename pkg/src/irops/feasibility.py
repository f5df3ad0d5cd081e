"""Schedule legality and cost, derived directly from the operational rules.

Nothing here touches the network or the MILP: the checker walks each
aircraft and crew timeline in departure order, so it can audit solver
output independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import DisruptedState, Flight, FlightPlan, RecoverySchedule, SlotIndex, rotations


@dataclass(frozen=True)
class Violation:
    kind: str
    entity: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.entity}: {self.message}"


def _horizon_flights(schedule: RecoverySchedule, state: DisruptedState) -> list[str]:
    finish = state.anchors.recovery_finish
    return [fid for fid, p in schedule.flights.items() if p is not None and p.departure <= finish]


def slot_usage(schedule: RecoverySchedule, state: DisruptedState) -> dict[str, tuple[int, int]]:
    """Per slot: (capacity left for decision flights, decision departures in the window)."""
    flight = state.instance.flight
    index = SlotIndex(state.slots)
    fixed = {s.id: 0 for s in state.slots}
    used = dict(fixed)
    for fid, plan in schedule.flights.items():
        if plan is None:
            continue
        for s in index.covering(flight[fid].origin, plan.departure):
            if fid in state.immutable:
                fixed[s.id] += 1
            else:
                used[s.id] += 1
    return {s.id: (max(0, s.capacity - fixed[s.id]), used[s.id]) for s in state.slots}


def check_feasibility(schedule: RecoverySchedule, state: DisruptedState) -> list[Violation]:
    """Return every broken operational rule; an empty list means the plan is executable."""
    inst = state.instance
    flight = inst.flight
    out: list[Violation] = []

    def bad(kind, entity, msg):
        out.append(Violation(kind, entity, msg))

    for f in inst.flights:
        if f.id not in schedule.flights:
            bad("unknown", f.id, "flight missing from schedule")
            continue
        plan = schedule.flights[f.id]
        if f.id in state.removed:
            if plan is not None:
                bad("fixed", f.id, "flight canceled by disruption cannot operate")
            continue
        if f.id in state.immutable:
            if plan != state.baseline.flights[f.id]:
                bad("fixed", f.id, "frozen flight was changed")
            continue
        if plan is None:
            continue
        if plan.aircraft not in inst.aircraft_by_id or plan.crew not in inst.crew:
            bad("unknown", f.id, "unknown aircraft or crew")
            continue
        if not state.departure_ok(f.id, plan.departure):
            bad("anchor", f.id, f"departure {plan.departure} outside the allowed window")
        if not state.resource_legal(f.id, plan.departure, plan.aircraft):
            bad("grounded", f.id, "departure collides with an aircraft grounding or airport closure")

    for mid, mplan in schedule.maintenances.items():
        m = inst.maintenance.get(mid)
        if m is None:
            bad("unknown", mid, "unknown maintenance")
        elif mplan is not None and not m.allows(mplan.airport, mplan.start):
            bad("maintenance", mid, "placement outside allowed windows")
    if out:
        return out

    in_horizon = _horizon_flights(schedule, state)
    by_ac, by_crew = rotations(schedule, inst, in_horizon)
    _check_aircraft(schedule, state, by_ac, bad)
    _check_crews(schedule, state, by_crew, bad)
    _check_multileg(schedule, state, by_ac, by_crew, bad)

    for sid, (room, used) in slot_usage(schedule, state).items():
        if used > room:
            bad("slot", sid, f"{used} departures exceed remaining capacity {room}")
    return out


def _check_aircraft(schedule, state, by_ac, bad):
    inst = state.instance
    flight = inst.flight
    maint_of: dict[str, list[tuple[str, object]]] = {}
    for mid, mplan in schedule.maintenances.items():
        maint_of.setdefault(inst.maintenance[mid].aircraft, []).append((mid, mplan))

    for ac in inst.aircraft:
        events = [(schedule.flights[fid].departure, 0, fid) for fid in by_ac.get(ac.id, [])]
        events += [(mp.start, 1, mid) for mid, mp in maint_of.get(ac.id, []) if mp is not None]
        events.sort()
        pos, ready = ac.initial_position, ac.available_from
        last: Optional[Flight] = None
        last_arr = None
        decision_ready = None
        for t, kind, ident in events:
            if kind == 0:
                f = flight[ident]
                if last is not None:
                    ready = last_arr + state.ground_time(last.destination, last, f)
                if f.origin != pos:
                    bad("rotation", ident, f"aircraft {ac.id} is at {pos}, not {f.origin}")
                if t < ready:
                    bad("turnaround", ident, f"aircraft {ac.id} ready at {ready}, departs {t}")
                pos, last, last_arr = f.destination, f, t + f.duration
                ready = last_arr + inst.airport[pos].min_turnaround
                if ident not in state.immutable:
                    decision_ready = ready
            else:
                m = inst.maintenance[ident]
                if last is not None:
                    ready = last_arr + inst.airport[pos].min_turnaround
                mp = schedule.maintenances[ident]
                if mp.airport != pos:
                    bad("maintenance", ident, f"aircraft {ac.id} is at {pos}, not {mp.airport}")
                if t < ready:
                    bad("maintenance", ident, f"aircraft {ac.id} ready at {ready}, maintenance at {t}")
                last = None
                ready = t + m.duration
                decision_ready = ready
        for mid, mp in maint_of.get(ac.id, []):
            if mp is None and decision_ready is not None:
                limit = inst.maintenance[mid].latest_start
                if decision_ready > limit:
                    bad("maintenance", mid,
                        f"aircraft {ac.id} keeps operating after failing maintenance (ready {decision_ready} > {limit})")


def _check_crews(schedule, state, by_crew, bad):
    inst = state.instance
    flight = inst.flight
    for cg in inst.crew_groups:
        seq = by_crew.get(cg.id, [])
        pos, ground_ready = cg.initial_position, cg.available_from
        aboard: Optional[str] = None
        last: Optional[Flight] = None
        last_arr = None
        flown = 0
        for fid in seq:
            f = flight[fid]
            plan = schedule.flights[fid]
            if f.origin != pos:
                bad("crew", fid, f"crew {cg.id} is at {pos}, not {f.origin}")
            stays_on = last is not None and aboard == plan.aircraft
            if stays_on:
                if plan.departure < last_arr:
                    bad("crew", fid, f"crew {cg.id} still airborne")
            else:
                mct = inst.airport[f.origin].min_crew_connection
                if plan.departure - mct < ground_ready:
                    bad("connection", fid, f"crew {cg.id} cannot board before {ground_ready + mct}")
            pos, aboard, last = f.destination, plan.aircraft, f
            last_arr = plan.departure + f.duration
            ground_ready = last_arr
            flown += f.duration
        if flown > cg.flight_time_limit:
            bad("duty", cg.id, f"flies {flown} min, limit {cg.flight_time_limit}")


def _check_multileg(schedule, state, by_ac, by_crew, bad):
    inst = state.instance
    pos_ac = {fid: (ac, i) for ac, seq in by_ac.items() for i, fid in enumerate(seq)}
    pos_cr = {fid: (c, i) for c, seq in by_crew.items() for i, fid in enumerate(seq)}
    maint_times: dict[str, list[int]] = {}
    for mid, mp in schedule.maintenances.items():
        if mp is not None:
            maint_times.setdefault(inst.maintenance[mid].aircraft, []).append(mp.start)
    for gid, legs in inst.multileg_groups.items():
        plans = [schedule.flights.get(leg.id) for leg in legs]
        if all(p is None for p in plans):
            continue
        if any(p is None for p in plans):
            bad("multileg", gid, "legs must all operate or all be canceled")
            continue
        if len({(p.aircraft, p.crew) for p in plans}) != 1:
            bad("multileg", gid, "legs must share one aircraft and crew")
            continue
        for (prev, pp), (nxt, pn) in zip(zip(legs, plans), zip(legs[1:], plans[1:])):
            if prev.id not in pos_ac or nxt.id not in pos_ac:
                continue
            a0, a1 = pos_ac[prev.id], pos_ac[nxt.id]
            c0, c1 = pos_cr[prev.id], pos_cr[nxt.id]
            if a1[1] != a0[1] + 1 or c1[1] != c0[1] + 1:
                bad("multileg", gid, f"another flight interleaves {prev.id} and {nxt.id}")
            arr = pp.departure + prev.duration
            if any(arr <= t < pn.departure for t in maint_times.get(pp.aircraft, [])):
                bad("multileg", gid, "maintenance inside a multileg transit")
            transit = inst.airport[prev.destination].min_transit
            if pn.departure < arr + transit:
                bad("multileg", gid, f"transit at {prev.destination} shorter than {transit}")


def flight_cost(state: DisruptedState, fid: str, plan: Optional[FlightPlan]) -> float:
    """Cost of one decision flight's disposition."""
    c = state.costs
    if plan is None:
        return c.cancellation_per_flight
    base = state.baseline.flights[fid]
    cost = (plan.departure - base.departure) * c.delay_per_minute
    if plan.aircraft != base.aircraft:
        cost += c.swap_cost
    if plan.crew != base.crew:
        cost += c.swap_cost
    return cost


def schedule_cost(schedule: RecoverySchedule, state: DisruptedState) -> float:
    """Recovery cost of a schedule: delays, cancellations, swaps, failed maintenance, idle slots."""
    total = 0.0
    for fid in state.decision_flights():
        total += flight_cost(state, fid, schedule.flights.get(fid))
    for m in state.instance.maintenances:
        if schedule.maintenances.get(m.id) is None:
            total += m.fail_penalty
    slot = {s.id: s for s in state.slots}
    for sid, (room, used) in slot_usage(schedule, state).items():
        total += slot[sid].nonuse_penalty * max(0, room - used)
    return total
