"""Decision options the recovery model may choose from.

Each decision flight gets a group holding a Canceled option and, when legal,
its as-planned Scheduled option. Flights near an irregularity also get
delayed copies and swap options; each maintenance gets a Failing option and
Succeeding placements implied by the flight options of its aircraft. Later
iterations only add options, driven by solver feedback.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .feasibility import check_feasibility
from .model import DisruptedState, Flight, RecoverySchedule, Slot, SlotIndex, rotations


class OptionKind(str, enum.Enum):
    SCHEDULED = "scheduled"
    CANCELED = "canceled"
    SUCCEEDING = "succeeding-maintenance"
    FAILING = "failing-maintenance"


@dataclass(frozen=True)
class OptionChoice:
    entity: str
    kind: OptionKind
    ordinal: int
    departure: Optional[int] = None
    aircraft: Optional[str] = None
    crew: Optional[str] = None
    airport: Optional[str] = None
    start: Optional[int] = None

    @property
    def key(self) -> tuple:
        return (self.entity, self.kind, self.departure, self.aircraft, self.crew, self.airport, self.start)

    def __str__(self) -> str:
        if self.kind is OptionKind.SCHEDULED:
            return f"{self.entity}@{self.departure}/{self.aircraft}/{self.crew}"
        if self.kind is OptionKind.SUCCEEDING:
            return f"{self.entity}@{self.airport}:{self.start}"
        return f"{self.entity}:{self.kind.value}"


@dataclass(frozen=True)
class SlotChoice:
    slot: Slot
    room: int  # capacity left after frozen departures
    members: tuple[OptionChoice, ...]


@dataclass(frozen=True)
class SearchConfig:
    granularity: int = 15
    radius: int = 180
    delay_threshold: int = 60
    budget: Optional[int] = None  # change options added per build/expand; None scales with size
    successor_depth: int = 1
    swap_times: int = 2
    max_partners: int = 3

    def budget_for(self, state: DisruptedState) -> int:
        if self.budget is not None:
            return self.budget
        return max(100, 8 * len(state.decision_flights()))


@dataclass(frozen=True)
class SolutionFeedback:
    large_delays: tuple[str, ...] = ()
    cancellations: tuple[str, ...] = ()
    maintenance_failures: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.large_delays or self.cancellations or self.maintenance_failures)


def feedback_from(schedule: RecoverySchedule, state: DisruptedState, threshold: int) -> SolutionFeedback:
    """Irregularities left in a solved schedule."""
    delays, cancels = [], []
    for fid in state.decision_flights():
        plan = schedule.flights.get(fid)
        if plan is None:
            cancels.append(fid)
        elif plan.departure - state.base_departure(fid) >= threshold:
            delays.append(fid)
    fails = sorted(m for m, p in schedule.maintenances.items() if p is None)
    return SolutionFeedback(tuple(delays), tuple(cancels), tuple(fails))


def cost_of(choice, state: DisruptedState) -> float:
    """Objective coefficient of a choice's decision expression.

    Scheduled options pay for delay against the disrupted baseline plus a
    swap charge per changed resource; a SlotChoice's coefficient applies to
    its nonuse variable.
    """
    c = state.costs
    if isinstance(choice, SlotChoice):
        return choice.slot.nonuse_penalty
    k = choice.kind
    if k is OptionKind.CANCELED:
        return c.cancellation_per_flight
    if k is OptionKind.FAILING:
        return state.instance.maintenance[choice.entity].fail_penalty
    if k is OptionKind.SUCCEEDING:
        return 0.0
    base = state.baseline.flights[choice.entity]
    cost = (choice.departure - base.departure) * c.delay_per_minute
    if choice.aircraft != base.aircraft:
        cost += c.swap_cost
    if choice.crew != base.crew:
        cost += c.swap_cost
    return cost


@dataclass
class SearchSpace:
    state: DisruptedState
    groups: dict[str, list[OptionChoice]]
    iteration: int = 1
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self._keys = {o.key for opts in self.groups.values() for o in opts}

    # -- construction helpers
    def _add(self, entity: str, kind: OptionKind, **params) -> Optional[OptionChoice]:
        opt = OptionChoice(entity, kind, len(self.groups.setdefault(entity, [])), **params)
        if opt.key in self._keys:
            return None
        self._keys.add(opt.key)
        self.groups[entity].append(opt)
        return opt

    def copy(self) -> "SearchSpace":
        return SearchSpace(self.state, {e: list(o) for e, o in self.groups.items()}, self.iteration, {})

    # -- queries
    def options(self) -> Iterable[OptionChoice]:
        for opts in self.groups.values():
            yield from opts

    def scheduled(self, fid: str) -> list[OptionChoice]:
        return [o for o in self.groups.get(fid, ()) if o.kind is OptionKind.SCHEDULED]

    def size(self) -> int:
        return sum(len(o) for o in self.groups.values())

    def change_count(self) -> int:
        """Options that differ from the disrupted baseline (the budgeted quantity)."""
        base = self.state.baseline
        n = 0
        for o in self.options():
            if o.kind is OptionKind.SCHEDULED:
                p = base.flights[o.entity]
                n += (o.departure, o.aircraft, o.crew) != (p.departure, p.aircraft, p.crew)
        return n

    def contains(self, entity: str, **params) -> bool:
        kind = OptionKind.SCHEDULED if "departure" in params else OptionKind.SUCCEEDING
        opt = OptionChoice(entity, kind, 0, **params)
        return opt.key in self._keys

    def slot_choices(self) -> list[SlotChoice]:
        st = self.state
        flight = st.instance.flight
        index = SlotIndex(st.slots)
        fixed = {s.id: 0 for s in st.slots}
        members: dict[str, list[OptionChoice]] = {s.id: [] for s in st.slots}
        for fid in st.immutable:
            plan = st.baseline.flights[fid]
            if plan is not None:
                for s in index.covering(flight[fid].origin, plan.departure):
                    fixed[s.id] += 1
        for o in self.options():
            if o.kind is OptionKind.SCHEDULED:
                for s in index.covering(flight[o.entity].origin, o.departure):
                    members[s.id].append(o)
        return [SlotChoice(s, max(0, s.capacity - fixed[s.id]), tuple(members[s.id])) for s in st.slots]


# --------------------------------------------------------------------------
# generation


class _Builder:
    """Adds options to a space while tracking the change budget and timings."""

    def __init__(self, space: SearchSpace, config: SearchConfig, reference: RecoverySchedule):
        self.space = space
        self.state = space.state
        self.cfg = config
        self.budget = config.budget_for(self.state)
        self.added = 0
        self.prox_time = 0.0
        self.inst = self.state.instance
        self.ref = reference
        self.by_ac, self.by_crew = rotations(reference, self.inst, self._horizon(reference))
        self.base_ac, self.base_crew = rotations(self.state.baseline, self.inst, self._horizon(self.state.baseline))
        self._ground = None
        self.earliest: dict[str, int] = {}

    def _horizon(self, schedule):
        rf = self.state.anchors.recovery_finish
        return [f for f, p in schedule.flights.items() if p is not None and p.departure <= rf]

    # -- legality
    def legal(self, f: Flight, dep: int, aircraft: str) -> bool:
        return self.state.departure_ok(f.id, dep) and self.state.resource_legal(f.id, dep, aircraft)

    def legs(self, fid: str) -> tuple[Flight, ...]:
        f = self.inst.flight[fid]
        if f.multileg_group is None:
            return (f,)
        return self.inst.multileg_groups[f.multileg_group]

    def offer(self, fid: str, dep: int, aircraft: str, crew: str) -> bool:
        """Add one scheduled option (all legs of a multileg group move together)."""
        legs = self.legs(fid)
        lead = self.inst.flight[fid]
        shift = dep - self.state.base_departure(lead.id)
        plan = [(leg, self.state.base_departure(leg.id) + shift) for leg in legs]
        if any(leg.id in self.state.removed or leg.id in self.state.immutable for leg, _ in plan):
            return False
        if not all(self.legal(leg, t, aircraft) for leg, t in plan):
            return False
        new = [(leg, t) for leg, t in plan
               if not self.space.contains(leg.id, departure=t, aircraft=aircraft, crew=crew)]
        if not new:
            return False
        base = self.state.baseline.flights
        changes = sum(1 for leg, t in new if (t, aircraft, crew) != (base[leg.id].departure, base[leg.id].aircraft,
                                                                    base[leg.id].crew))
        if changes and self.added + changes > self.budget:
            return False
        for leg, t in new:
            self.space._add(leg.id, OptionKind.SCHEDULED, departure=t, aircraft=aircraft, crew=crew)
        self.added += changes
        return True

    # -- candidate times
    def times(self, fid: str) -> list[int]:
        a = self.state.anchors
        base = self.state.base_departure(fid)
        lo = max(base, a.recovery_start)
        hi = min(base + a.max_delay, a.recovery_finish)
        out = {base}
        if lo <= hi:
            out.add(lo)
            out.update(t for t in range(base, hi + 1, self.cfg.granularity) if t >= lo)
        return sorted(out)

    def ripple(self, fid: str, aircraft: str, crew: str) -> list[int]:
        """Departure times at which the flight's predecessors become ready.

        A predecessor counts at the earliest time already established for it
        in this pass, or at its reference departure.
        """
        f = self.inst.flight[fid]
        out = set()
        mct = self.inst.airport[f.origin].min_crew_connection
        for seqs, sched in ((self.base_ac, self.state.baseline), (self.by_ac, self.ref)):
            p = _previous(seqs.get(aircraft, []), fid, sched, self.inst)
            if p is not None:
                pf = self.inst.flight[p]
                t = self.earliest.get(p, sched.flights[p].departure)
                out.add(t + pf.duration + self.state.ground_time(pf.destination, pf, f))
        for seqs, sched in ((self.base_crew, self.state.baseline), (self.by_crew, self.ref)):
            p = _previous(seqs.get(crew, []), fid, sched, self.inst)
            if p is not None:
                pf = self.inst.flight[p]
                t = self.earliest.get(p, sched.flights[p].departure)
                out.add(t + pf.duration + (0 if sched.flights[p].aircraft == aircraft else mct))
        base = self.state.base_departure(fid)
        return sorted(t for t in out if t > base and self.state.departure_ok(fid, t))

    def delay_options(self, fid: str) -> None:
        base = self.state.baseline.flights[fid]
        if base is None:
            return
        rip = self.ripple(fid, base.aircraft, base.crew)
        if rip:
            self.earliest[fid] = max(rip)
        for t in sorted(set(self.times(fid)) | set(rip)):
            self.offer(fid, t, base.aircraft, base.crew)

    # -- proximity
    def ground_intervals(self):
        """Per resource, where and when it sits on the ground in the reference schedule."""
        if self._ground is not None:
            return self._ground
        t0 = time.perf_counter()
        st, inst, ref = self.state, self.inst, self.ref
        ac_iv: dict[str, list[tuple[str, int, float]]] = {}
        for ac, seq in self.by_ac.items():
            sp = st.aircraft_start[ac]
            pos, ready, iv = sp.airport, sp.time, []
            for fid in seq:
                f, p = inst.flight[fid], ref.flights[fid]
                if fid in st.immutable and p.departure < st.anchors.current_time:
                    continue
                iv.append((pos, ready, p.departure))
                pos, ready = f.destination, p.departure + f.duration + inst.airport[f.destination].min_turnaround
            iv.append((pos, ready, float("inf")))
            ac_iv[ac] = iv
        cr_iv: dict[str, list[tuple[str, int, float]]] = {}
        for cid, seq in self.by_crew.items():
            sp = st.crew_start[cid]
            pos, ready, iv = sp.airport, sp.time, []
            for fid in seq:
                f, p = inst.flight[fid], ref.flights[fid]
                if fid in st.immutable and p.departure < st.anchors.current_time:
                    continue
                iv.append((pos, ready, p.departure))
                pos, ready = f.destination, p.departure + f.duration
            iv.append((pos, ready, float("inf")))
            cr_iv[cid] = iv
        self._ground = (ac_iv, cr_iv)
        self.prox_time += time.perf_counter() - t0
        return self._ground

    def partners(self, fid: str, radius: int) -> tuple[list[tuple[str, int]], list[tuple[str, int]]]:
        """Aircraft and crews on the ground at the flight's origin near its departure."""
        ac_iv, cr_iv = self.ground_intervals()
        t0 = time.perf_counter()
        f = self.inst.flight[fid]
        base = self.state.baseline.flights[fid]
        dep = base.departure
        lo, hi = dep - radius, dep + radius

        def near(ivs, skip):
            found = []
            for res in sorted(ivs):
                if res == skip:
                    continue
                for pos, ready, until in ivs[res]:
                    if pos == f.origin and ready <= hi and until >= lo:
                        found.append((abs(ready - dep), res, ready))
                        break
            found.sort()
            return [(r, rd) for _, r, rd in found[: self.cfg.max_partners]]

        out = near(ac_iv, base.aircraft), near(cr_iv, base.crew)
        self.prox_time += time.perf_counter() - t0
        return out

    def swap_options(self, fid: str, radius: int) -> None:
        base = self.state.baseline.flights[fid]
        if base is None:
            return
        f = self.inst.flight[fid]
        aircraft, crews = self.partners(fid, radius)
        ts = self.times(fid)
        mct = self.inst.airport[f.origin].min_crew_connection
        for b, ready in aircraft:
            for t in [t for t in ts if t >= ready][: self.cfg.swap_times]:
                self.offer(fid, t, b, base.crew)
            # the partner's next departure from here may take the freed aircraft
            nxt = _next_from(self.by_ac.get(b, []), self.ref, self.inst, f.origin, ready)
            if nxt is not None and nxt not in self.state.immutable and self.state.baseline.flights[nxt] is not None:
                crew_n = self.state.baseline.flights[nxt].crew
                for t in self.times(nxt)[: self.cfg.swap_times]:
                    self.offer(nxt, t, base.aircraft, crew_n)
        for c, ready in crews:
            for t in [t for t in ts if t - mct >= ready][: self.cfg.swap_times]:
                self.offer(fid, t, base.aircraft, c)

    # -- neighbourhood
    def successors(self, fids: Iterable[str], depth: int) -> set[str]:
        out = set()
        decision = set(self.state.decision_flights())
        for seqs in (self.base_ac, self.base_crew, self.by_ac, self.by_crew):
            for seq in seqs.values():
                for i, fid in enumerate(seq):
                    if fid in fids:
                        out.update(g for g in seq[i + 1: i + 1 + depth] if g in decision)
        return out

    def maintenance_options(self) -> None:
        st, inst = self.state, self.inst
        for m in inst.maintenances:
            if m.id not in self.space.groups:
                self.space._add(m.id, OptionKind.FAILING)
                ap, start = m.planned
                if m.allows(ap, start):
                    self.space._add(m.id, OptionKind.SUCCEEDING, airport=ap, start=start)
            cands = set()
            for w in m.allowed_windows:
                cands.add((w.airport, w.earliest_start))
                sp = st.aircraft_start[m.aircraft]
                if sp.airport == w.airport:
                    cands.add((w.airport, max(sp.time, w.earliest_start)))
            for o in self.space.options():
                if o.kind is OptionKind.SCHEDULED and o.aircraft == m.aircraft:
                    f = inst.flight[o.entity]
                    ready = o.departure + f.duration + inst.airport[f.destination].min_turnaround
                    for w in m.allowed_windows:
                        if w.airport == f.destination:
                            s = max(ready, w.earliest_start)
                            if s <= w.latest_start:
                                cands.add((w.airport, s))
            for ap, s in sorted(cands, key=lambda x: (x[1], x[0])):
                if m.allows(ap, s):
                    self.space._add(m.id, OptionKind.SUCCEEDING, airport=ap, start=s)

    def base_groups(self) -> None:
        st = self.state
        for fid in st.decision_flights():
            if fid not in self.space.groups:
                self.space._add(fid, OptionKind.CANCELED)
                p = st.baseline.flights[fid]
                if st.resource_legal(fid, p.departure, p.aircraft):
                    self.space._add(fid, OptionKind.SCHEDULED, departure=p.departure, aircraft=p.aircraft,
                                    crew=p.crew)


def _previous(seq: list[str], fid: str, schedule, inst) -> Optional[str]:
    if fid in seq:
        i = seq.index(fid)
        return seq[i - 1] if i > 0 else None
    # flight not on this resource: the latest one departing before it
    dep = schedule.flights[fid].departure if schedule.flights.get(fid) else inst.flight[fid].sched_departure
    before = [g for g in seq if schedule.flights[g].departure < dep]
    return before[-1] if before else None


def _next_from(seq, schedule, inst, airport, ready) -> Optional[str]:
    for fid in seq:
        p = schedule.flights[fid]
        if p.departure >= ready and inst.flight[fid].origin == airport:
            return fid
    return None


def baseline_hotspots(state: DisruptedState) -> set[str]:
    """Decision flights touched by a disruption or visibly broken in the disrupted baseline."""
    inst = state.instance
    decision = set(state.decision_flights())
    hot = set(state.disrupted) & decision
    probe = state.baseline.copy()
    for fid in decision:
        p = probe.flights[fid]
        if p is not None and not state.resource_legal(fid, p.departure, p.aircraft):
            probe.flights[fid] = None
    by_ac, by_crew = rotations(probe, inst)
    flight = inst.flight
    for v in check_feasibility(probe, state):
        e = v.entity
        if e in flight:
            hot.add(e)
        elif e in inst.crew:
            hot.update(by_crew.get(e, []))
        elif e in inst.maintenance:
            hot.update(by_ac.get(inst.maintenance[e].aircraft, [])[-2:])
        elif e in inst.slot:
            s = next(s for s in state.slots if s.id == e)
            hot.update(f for f in decision if probe.flights[f] is not None
                       and s.contains(flight[f].origin, probe.flights[f].departure))
        elif e in inst.multileg_groups:
            hot.update(leg.id for leg in inst.multileg_groups[e])
    # a removed flight breaks the rotations it belonged to
    for fid in state.removed:
        hot.update(_after(state, fid))
    return hot & decision


def _after(state: DisruptedState, fid: str) -> list[str]:
    orig = state.original.flights[fid]
    out = []
    for attr in ("aircraft", "crew"):
        cands = [g for g in state.decision_flights()
                 if getattr(state.baseline.flights[g], attr) == getattr(orig, attr)
                 and state.base_departure(g) > orig.departure]
        if cands:
            out.append(cands[0])
    return out


def build_initial_space(state: DisruptedState, budget: Optional[int] = None,
                        config: SearchConfig = SearchConfig()) -> SearchSpace:
    """First-iteration options, concentrated around the visible irregularities."""
    t0 = time.perf_counter()
    if budget is not None:
        config = SearchConfig(**{**config.__dict__, "budget": budget})
    space = SearchSpace(state, {}, 1)
    b = _Builder(space, config, state.baseline)
    b.base_groups()
    hot = baseline_hotspots(state)
    targets = hot | b.successors(hot, config.successor_depth)
    order = sorted(targets, key=lambda f: (state.base_departure(f), f))
    for fid in order:
        b.delay_options(fid)
    for fid in sorted(hot, key=lambda f: (state.base_departure(f), f)):
        b.swap_options(fid, config.radius)
    b.maintenance_options()
    total = time.perf_counter() - t0
    space.stats = {"proximity": b.prox_time, "generation": total - b.prox_time, "added": b.added,
                   "targets": len(targets)}
    return space


def expand_space(space: SearchSpace, feedback: SolutionFeedback, budget: Optional[int] = None,
                 config: SearchConfig = SearchConfig(), schedule: Optional[RecoverySchedule] = None) -> SearchSpace:
    """Grow the space around the irregularities named in the feedback; never removes options."""
    t0 = time.perf_counter()
    if budget is not None:
        config = SearchConfig(**{**config.__dict__, "budget": budget})
    state = space.state
    new = space.copy()
    new.iteration = space.iteration + 1
    ref = schedule or state.baseline
    b = _Builder(new, config, ref)
    if feedback:
        # each later iteration looks further away in time and along rotations
        radius = config.radius * new.iteration
        depth = config.successor_depth + new.iteration - 2
        named = set(feedback.cancellations) | set(feedback.large_delays)
        for mid in feedback.maintenance_failures:
            ac = state.instance.maintenance[mid].aircraft
            named.update(f for f in b.by_ac.get(ac, []) if f not in state.immutable)
            named.update(f for f in state.decision_flights()
                         if state.baseline.flights[f].aircraft == ac)
        named &= set(state.decision_flights())
        chain = b.successors(named, depth)
        for fid in sorted(named | chain, key=lambda f: (state.base_departure(f), f)):
            b.delay_options(fid)
            plan = ref.flights.get(fid)
            if plan is not None:
                # keep pace with where the solved schedule actually places its resources
                for t in b.ripple(fid, plan.aircraft, plan.crew):
                    b.offer(fid, t, plan.aircraft, plan.crew)
        for fid in sorted(named, key=lambda f: (state.base_departure(f), f)):
            b.swap_options(fid, radius)
        if feedback.maintenance_failures:
            _spread_maintenance(new, config)
        b.maintenance_options()
    total = time.perf_counter() - t0
    new.stats = {"proximity": b.prox_time, "generation": total - b.prox_time, "added": new.size() - space.size(),
                 "targets": 0}
    return new


def _spread_maintenance(space: SearchSpace, config: SearchConfig) -> None:
    for m in space.state.instance.maintenances:
        for w in m.allowed_windows:
            for s in range(w.earliest_start, w.latest_start + 1, config.granularity):
                space._add(m.id, OptionKind.SUCCEEDING, airport=w.airport, start=s)
