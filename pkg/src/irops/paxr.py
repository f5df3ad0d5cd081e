"""Passenger re-accommodation and schedule refinement.

``assign_itineraries`` places every itinerary on a recovered schedule in
three passes: itineraries already under way, untouched itineraries that can
keep their booked flights, and everything else through an earliest-arrival
search. ``evolve`` then mutates the schedule with a mutation-only genetic
algorithm whose fitness is recovery cost plus passenger cost.
"""

from __future__ import annotations

import bisect
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from .feasibility import check_feasibility, schedule_cost
from .model import (CabinClass, DisruptedState, FlightPlan, Itinerary, PassengerAssignment, PaxGroup,
                    ProblemInstance, RecoverySchedule, rotations)

MAX_TRANSFERS = 3
_CABINS_DOWN = tuple(sorted(CabinClass, reverse=True))


# --------------------------------------------------------------------------
# costs and capacities


def reference_cabin(it: Itinerary) -> CabinClass:
    """Cabin the itinerary is entitled to everywhere: its lowest booked cabin."""
    return min(leg.cabin for leg in it.legs)


def arrival_of(schedule: RecoverySchedule, instance: ProblemInstance, fid: str) -> int:
    return schedule.flights[fid].departure + instance.flight[fid].duration


def group_cost(it: Itinerary, g: PaxGroup, schedule: RecoverySchedule, instance: ProblemInstance) -> float:
    if not g.delivered:
        return g.count * it.cancellation_cost
    ref = reference_cabin(it)
    steps = max((int(ref) - int(c) for _, c in g.segments), default=0)
    steps = max(0, steps)
    planned = instance.flight[it.legs[-1].flight].sched_arrival
    late = max(0, arrival_of(schedule, instance, g.segments[-1][0]) - planned) if g.segments else 0
    return g.count * (steps * it.downgrade_cost + late * it.delay_cost)


def passenger_cost(assignment: PassengerAssignment, schedule: RecoverySchedule, instance: ProblemInstance) -> float:
    """Cost recomputed from the groups alone, independent of how they were built."""
    total = 0.0
    for it in instance.itineraries:
        groups = assignment.groups.get(it.id, ())
        placed = sum(g.count for g in groups)
        total += sum(group_cost(it, g, schedule, instance) for g in groups)
        total += max(0, it.passenger_count - placed) * it.cancellation_cost
    return total


def seat_capacity(schedule: RecoverySchedule, instance: ProblemInstance) -> dict[tuple[str, CabinClass], int]:
    cap = {}
    for f in instance.flights:
        flying = schedule.flights.get(f.id) is not None
        for c in CabinClass:
            cap[(f.id, c)] = f.seats[c] if flying else 0
    return cap


def capacity_violations(assignment: PassengerAssignment, schedule: RecoverySchedule,
                        instance: ProblemInstance) -> list[str]:
    """(flight, cabin) pairs whose recomputed load exceeds the seats on offer."""
    cap = seat_capacity(schedule, instance)
    return [f"{fid}/{c.label}: {n} > {cap.get((fid, c), 0)}"
            for (fid, c), n in sorted(assignment.loads().items()) if n > cap.get((fid, c), 0)]


# --------------------------------------------------------------------------
# earliest-arrival search


@dataclass(frozen=True, eq=False)
class _Label:
    arrival: int
    downgrade: int
    legs: int
    flight: Optional[str]
    cabin: Optional[CabinClass]
    prev: Optional["_Label"]

    def path(self) -> list[tuple[str, CabinClass]]:
        out, lab = [], self
        while lab is not None and lab.flight is not None:
            out.append((lab.flight, lab.cabin))
            lab = lab.prev
        return out[::-1]


class Network:
    """Operated flights of a schedule indexed for connection search."""

    def __init__(self, schedule: RecoverySchedule, instance: ProblemInstance, not_before: int):
        self.instance = instance
        self.schedule = schedule
        self.by_origin: dict[str, list[tuple[int, int, str]]] = {}
        for f in instance.flights:
            p = schedule.flights.get(f.id)
            if p is None or p.departure < not_before:
                continue
            self.by_origin.setdefault(f.origin, []).append((p.departure, p.departure + f.duration, f.id))
        for lst in self.by_origin.values():
            lst.sort()
        self.deps = {a: [d for d, _, _ in lst] for a, lst in self.by_origin.items()}

    def earliest_arrival(self, origin: str, ready: int, destination: str, ref: CabinClass,
                         cap: dict, max_transfers: int = MAX_TRANSFERS) -> Optional[list[tuple[str, CabinClass]]]:
        """Earliest arriving path with free seats, then fewest downgrade steps, then fewest legs.

        Labels are Pareto sets of (arrival, downgrade) per airport, extended
        one flight per round; passengers connect after the airport's minimum
        transit time and never move above their reference cabin.
        """
        inst = self.instance
        start = _Label(ready, 0, 0, None, None, None)
        frontier = {origin: [start]}
        best: dict[str, list[_Label]] = {origin: [start]}
        found: list[_Label] = []
        for _ in range(max_transfers + 1):
            nxt: dict[str, list[_Label]] = {}
            for ap, labels in frontier.items():
                flights = self.by_origin.get(ap)
                if not flights:
                    continue
                for lab in labels:
                    t = lab.arrival if lab.flight is None else lab.arrival + inst.airport[ap].min_transit
                    k = bisect.bisect_left(self.deps[ap], t)
                    for dep, arr, fid in flights[k:]:
                        cabin = next((c for c in _CABINS_DOWN if c <= ref and cap.get((fid, c), 0) > 0), None)
                        if cabin is None:
                            continue
                        dest = inst.flight[fid].destination
                        if dest == origin:
                            continue
                        new = _Label(arr, max(lab.downgrade, int(ref) - int(cabin)), lab.legs + 1, fid, cabin, lab)
                        if _dominated(new, best.get(dest, ())):
                            continue
                        best[dest] = [b for b in best.get(dest, []) if not _dominates(new, b)] + [new]
                        if dest == destination:
                            found.append(new)
                        else:
                            nxt.setdefault(dest, []).append(new)
            alive = {id(lab) for labs in best.values() for lab in labs}
            frontier = {a: [lab for lab in labs if id(lab) in alive] for a, labs in nxt.items()}
            if not frontier:
                break
        if not found:
            return None
        win = min(found, key=lambda lab: (lab.arrival, lab.downgrade, lab.legs, lab.path()))
        return win.path()


def _dominates(a: _Label, b: _Label) -> bool:
    return a.arrival <= b.arrival and a.downgrade <= b.downgrade and a.legs <= b.legs


def _dominated(a: _Label, labels) -> bool:
    return any(_dominates(b, a) for b in labels)


# --------------------------------------------------------------------------
# the three passes


@dataclass
class _Work:
    """Mutable bookkeeping shared by the passes of one assignment run."""

    state: DisruptedState
    schedule: RecoverySchedule
    cap: dict
    groups: dict[str, list[PaxGroup]]
    network: Network
    max_transfers: int
    # seats only ever shrink during a run, so a best path stays best while its seats last
    # and a failed search stays failed
    _paths: dict = field(default_factory=dict)

    def best_path(self, origin: str, ready: int, dest: str, ref: CabinClass):
        key = (origin, ready, dest, ref)
        if key in self._paths:
            path = self._paths[key]
            if path is None or all(self.cap[s] > 0 for s in path):
                return path
        path = self.network.earliest_arrival(origin, ready, dest, ref, self.cap, self.max_transfers)
        self._paths[key] = path
        return path

    def take(self, segments, n: int) -> int:
        n = min([n] + [self.cap[s] for s in segments])
        if n > 0:
            for s in segments:
                self.cap[s] -= n
        return max(0, n)

    def connects(self, prev_fid: Optional[str], fid: str, ready: Optional[int] = None) -> bool:
        sch, inst = self.schedule, self.state.instance
        p = sch.flights.get(fid)
        if p is None:
            return False
        if prev_fid is None:
            return ready is None or p.departure >= ready
        f_prev = inst.flight[prev_fid]
        if f_prev.destination != inst.flight[fid].origin:
            return False
        arr = arrival_of(sch, inst, prev_fid)
        return p.departure >= arr + inst.airport[f_prev.destination].min_transit

    def reroute(self, it: Itinerary, prefix: list, n: int, origin: str, ready: int) -> int:
        """Repeated best-path rerouting of ``n`` passengers; returns how many were placed."""
        ref = reference_cabin(it)
        dest = self.state.instance.flight[it.legs[-1].flight].destination
        placed = 0
        while placed < n:
            path = self.best_path(origin, ready, dest, ref)
            if path is None:
                break
            k = self.take(path, n - placed)
            if k <= 0:
                break
            self.groups[it.id].append(PaxGroup(k, tuple(prefix) + tuple(path)))
            placed += k
        return placed

    def strand(self, it: Itinerary, prefix: list, n: int) -> None:
        if n > 0:
            self.groups[it.id].append(PaxGroup(n, tuple(prefix), delivered=False))


def _flown_prefix(it: Itinerary, state: DisruptedState, schedule: RecoverySchedule) -> int:
    rp = state.anchors.recovery_start
    k = 0
    for leg in it.legs:
        p = schedule.flights.get(leg.flight)
        if p is None or p.departure >= rp:
            break
        k += 1
    return k


def assign_fixed(work: _Work, itineraries: list[Itinerary]) -> None:
    """Itineraries with legs flown before the recovery point."""
    inst = work.state.instance

    def remaining(it):
        k = _flown_prefix(it, work.state, work.schedule)
        here = arrival_of(work.schedule, inst, it.legs[k - 1].flight)
        return (inst.flight[it.legs[-1].flight].sched_arrival - here, it.id)

    for it in sorted(itineraries, key=remaining):
        k = _flown_prefix(it, work.state, work.schedule)
        prefix = [(leg.flight, leg.cabin) for leg in it.legs[:k]]
        n = work.take(prefix, it.passenger_count)
        work.strand(it, [], it.passenger_count - n)
        if k == len(it.legs):
            work.groups[it.id].append(PaxGroup(n, tuple(prefix)))
            continue
        rest = [(leg.flight, leg.cabin) for leg in it.legs[k:]]
        chain_ok = all(work.connects(a, b) for a, b in
                       zip([it.legs[k - 1].flight] + [f for f, _ in rest[:-1]], [f for f, _ in rest]))
        kept = work.take(rest, n) if chain_ok else 0
        if kept:
            work.groups[it.id].append(PaxGroup(kept, tuple(prefix + rest)))
        last = it.legs[k - 1].flight
        origin = inst.flight[last].destination
        ready = arrival_of(work.schedule, inst, last) + inst.airport[origin].min_transit
        left = n - kept
        placed = work.reroute(it, prefix, left, origin, ready)
        work.strand(it, prefix, left - placed)


def assign_feasible(work: _Work, itineraries: list[Itinerary]) -> dict[str, int]:
    """Untouched itineraries keep their booked flights as far as seats allow; returns the leftovers."""
    leftovers = {}
    for it in sorted(itineraries, key=lambda it: (-it.passenger_count * it.cancellation_cost, it.id)):
        segs = [(leg.flight, leg.cabin) for leg in it.legs]
        fids = [f for f, _ in segs]
        ok = all(work.connects(a, b) for a, b in zip([None] + fids[:-1], fids))
        kept = work.take(segs, it.passenger_count) if ok else 0
        if kept:
            work.groups[it.id].append(PaxGroup(kept, tuple(segs)))
        if it.passenger_count - kept:
            leftovers[it.id] = it.passenger_count - kept
    return leftovers


def assign_infeasible(work: _Work, itineraries: list[Itinerary], leftovers: dict[str, int]) -> None:
    """Earliest-arrival rerouting for whoever is still unplaced; the rest are canceled."""
    inst = work.state.instance
    rp = work.state.anchors.recovery_start
    for it in sorted(itineraries, key=lambda it: (-it.passenger_count * it.cancellation_cost, it.id)):
        n = leftovers.get(it.id, 0)
        if not n:
            continue
        first = inst.flight[it.legs[0].flight]
        placed = work.reroute(it, [], n, first.origin, max(rp, first.sched_departure))
        work.strand(it, [], n - placed)


def assign_itineraries(schedule: RecoverySchedule, state: DisruptedState,
                       max_transfers: int = MAX_TRANSFERS) -> PassengerAssignment:
    """Place every itinerary on ``schedule``; capacities start full and only shrink."""
    inst = state.instance
    rp = state.anchors.recovery_start
    work = _Work(state, schedule, seat_capacity(schedule, inst), {it.id: [] for it in inst.itineraries},
                 Network(schedule, inst, rp), max_transfers)
    begun = [it for it in inst.itineraries if _flown_prefix(it, state, schedule) > 0]
    fresh = [it for it in inst.itineraries if _flown_prefix(it, state, schedule) == 0]
    assign_fixed(work, begun)
    leftovers = assign_feasible(work, fresh)
    assign_infeasible(work, fresh, leftovers)
    out = PassengerAssignment({k: tuple(v) for k, v in work.groups.items()})
    out.cost = passenger_cost(out, schedule, inst)
    return out


# --------------------------------------------------------------------------
# genetic refinement


@dataclass(frozen=True)
class GaConfig:
    population: int = 50
    parents: int = 30
    generations: Optional[int] = None  # stop after this many generations
    time_budget: Optional[float] = None  # seconds
    seed: int = 0
    workers: int = 1
    attempts: int = 20
    grid: int = 15
    max_transfers: int = MAX_TRANSFERS


@dataclass
class Individual:
    schedule: RecoverySchedule
    assignment: PassengerAssignment
    schedule_cost: float
    seq: int
    changes: tuple[str, ...] = ()

    @property
    def fitness(self) -> float:
        return self.schedule_cost + self.assignment.cost


@dataclass
class EvolutionResult:
    schedule: RecoverySchedule
    assignment: PassengerAssignment
    fitness: float
    initial_fitness: float
    initial_pax_cost: float
    generations: int
    trace: list[float] = field(default_factory=list)  # best fitness after each generation
    seconds: float = 0.0

    def __iter__(self):
        yield self.schedule
        yield self.assignment


class Mutator:
    """Feasibility-preserving random edits of a schedule."""

    def __init__(self, state: DisruptedState, rng: random.Random, config: GaConfig):
        self.state = state
        self.rng = rng
        self.config = config
        self.inst = state.instance
        self.decision = state.decision_flights()
        self.decision_set = set(self.decision)
        self.legs = {fid: self._group(fid) for fid in self.decision}

    def _group(self, fid: str) -> tuple[str, ...]:
        f = self.inst.flight[fid]
        if f.multileg_group is None:
            return (fid,)
        return tuple(g.id for g in self.inst.multileg_groups[f.multileg_group])

    def mutate(self, sched: RecoverySchedule, loads: dict) -> tuple[RecoverySchedule, str]:
        ops = (self.shift, self.swap, self.uncancel, self.cancel)
        for _ in range(self.config.attempts):
            op = self.rng.choice(ops)
            out = op(sched, loads)
            if out is None:
                continue
            cand, label = out
            if not check_feasibility(cand, self.state):
                return cand, label
        return sched.copy(), "copy"

    # -- operators
    def _legal_time(self, fid: str, dep: int) -> bool:
        a = self.state.anchors
        base = self.state.base_departure(fid)
        return a.recovery_start <= dep <= min(base + a.max_delay, a.recovery_finish) and self.state.departure_ok(fid, dep)

    def shift(self, sched, loads):
        live = [f for f in self.decision if sched.flights.get(f) is not None]
        if not live:
            return None
        fid = self.rng.choice(live)
        delta = self.rng.choice((-2, -1, 1, 2)) * self.config.grid
        out = sched.copy()
        for leg in self.legs[fid]:
            p = out.flights[leg]
            if p is None or not self._legal_time(leg, p.departure + delta):
                return None
            out.flights[leg] = FlightPlan(p.departure + delta, p.aircraft, p.crew)
        if delta > 0 and not self._ripple(out, set(self.legs[fid])):
            return None
        return out, f"shift {fid} {delta:+d}"

    def _ripple(self, sched: RecoverySchedule, moved: set) -> bool:
        """Push later flights of the touched resources until ground times hold again."""
        inst, st = self.inst, self.state
        for _ in range(len(self.decision) + 1):
            changed = False
            by_ac, by_crew = rotations(sched, inst)
            for key, seqs in (("aircraft", by_ac), ("crew", by_crew)):
                for res, seq in seqs.items():
                    for a, b in zip(seq, seq[1:]):
                        pa, pb = sched.flights[a], sched.flights[b]
                        fa = inst.flight[a]
                        arr = pa.departure + fa.duration
                        if key == "aircraft":
                            need = arr + st.ground_time(fa.destination, fa, inst.flight[b])
                        elif pa.aircraft == pb.aircraft:
                            need = arr
                        else:
                            need = arr + inst.airport[fa.destination].min_crew_connection
                        if pb.departure >= need:
                            continue
                        if b not in self.decision_set:
                            return False
                        g = self.config.grid
                        delta = -(-(need - pb.departure) // g) * g
                        for leg in self.legs[b]:
                            p = sched.flights[leg]
                            if p is None or not self._legal_time(leg, p.departure + delta):
                                return False
                            sched.flights[leg] = FlightPlan(p.departure + delta, p.aircraft, p.crew)
                        changed = True
            if not changed:
                return True
        return False

    def swap(self, sched, loads):
        key = self.rng.choice(("aircraft", "crew"))
        seqs = rotations(sched, self.inst)[0 if key == "aircraft" else 1]
        # rotation tails that start from the same airport
        starts: dict[str, list[tuple[str, int]]] = {}
        for res, seq in sorted(seqs.items()):
            for i, fid in enumerate(seq):
                if fid in self.decision_set and self.inst.flight[fid].leg_index == 0:
                    starts.setdefault(self.inst.flight[fid].origin, []).append((res, i))
        pairs = [(ap, lst) for ap, lst in sorted(starts.items()) if len({r for r, _ in lst}) > 1]
        if not pairs:
            return None
        ap, lst = self.rng.choice(pairs)
        (r1, i1), (r2, i2) = self.rng.sample(lst, 2)
        if r1 == r2:
            return None
        out = sched.copy()
        tail1, tail2 = seqs[r1][i1:], seqs[r2][i2:]
        if any(f not in self.decision_set for f in tail1 + tail2):
            return None
        for fid in tail1:
            p = out.flights[fid]
            out.flights[fid] = FlightPlan(p.departure, r2, p.crew) if key == "aircraft" else FlightPlan(p.departure, p.aircraft, r2)
        for fid in tail2:
            p = out.flights[fid]
            out.flights[fid] = FlightPlan(p.departure, r1, p.crew) if key == "aircraft" else FlightPlan(p.departure, p.aircraft, r1)
        return out, f"swap {key} {r1}/{r2} at {ap}"

    def _loops(self, sched, operated: bool) -> list[tuple[str, ...]]:
        """Removable (or restorable) units: a rotation's last flight group, or an out-and-back pair."""
        base = self.state.baseline
        seqs = rotations(base, self.inst)[0]
        units = []
        for res, seq in sorted(seqs.items()):
            seq = [f for f in seq if f in self.decision_set]
            groups = []
            for fid in seq:
                g = self.legs[fid]
                if g[0] == fid:
                    groups.append(g)
            for k, g in enumerate(groups):
                status = [sched.flights.get(f) is not None for f in g]
                if operated and not all(status) or not operated and any(status):
                    continue
                live_after = [h for h in groups[k + 1:] if sched.flights.get(h[0]) is not None]
                if not live_after:
                    units.append(g)
                    continue
                if k + 1 < len(groups):
                    h = groups[k + 1]
                    h_status = [sched.flights.get(f) is not None for f in h]
                    if (operated and all(h_status) or not operated and not any(h_status)) and \
                            self.inst.flight[h[-1]].destination == self.inst.flight[g[0]].origin:
                        units.append(g + h)
        return units

    def uncancel(self, sched, loads):
        units = self._loops(sched, operated=False)
        if not units:
            return None
        unit = self.rng.choice(units)
        out = sched.copy()
        base = self.state.baseline
        for fid in unit:
            p = base.flights[fid]
            if p is None:
                f = self.inst.flight[fid]
                p = FlightPlan(max(f.sched_departure, self.state.anchors.recovery_start), f.original_aircraft, f.original_crew)
            out.flights[fid] = p
        if not self._ripple(out, set(unit)):
            return None
        return out, "uncancel " + "+".join(unit)

    def cancel(self, sched, loads):
        units = self._loops(sched, operated=True)
        if not units:
            return None
        # prefer lightly loaded units
        weight = [1.0 / (1 + sum(loads.get(f, 0) for f in u)) for u in units]
        unit = self.rng.choices(units, weights=weight)[0]
        out = sched.copy()
        for fid in unit:
            out.flights[fid] = None
        return out, "cancel " + "+".join(unit)


def _flight_loads(assignment: PassengerAssignment) -> dict[str, int]:
    out: dict[str, int] = {}
    for (fid, _), n in assignment.loads().items():
        out[fid] = out.get(fid, 0) + n
    return out


_WORKER_STATE: dict = {}


def _init_worker(state: DisruptedState, max_transfers: int) -> None:
    _WORKER_STATE["state"] = state
    _WORKER_STATE["mt"] = max_transfers


def _evaluate_remote(schedule: RecoverySchedule):
    st = _WORKER_STATE["state"]
    return schedule_cost(schedule, st), assign_itineraries(schedule, st, _WORKER_STATE["mt"])


def evolve(state: DisruptedState, baseline: RecoverySchedule, config: GaConfig = GaConfig(),
           on_generation: Optional[Callable[[int, list[Individual]], None]] = None) -> EvolutionResult:
    """Mutation-only elitist search starting from ``baseline``; returns the best individual seen."""
    t0 = time.perf_counter()
    rng = random.Random(config.seed)
    mut = Mutator(state, rng, config)
    seq = iter(range(10 ** 12))

    pool = None
    if config.workers > 1:
        pool = ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(state, config.max_transfers))

    def evaluate(scheds: list[RecoverySchedule]) -> list[tuple[float, PassengerAssignment]]:
        if pool is None:
            return [(schedule_cost(s, state), assign_itineraries(s, state, config.max_transfers)) for s in scheds]
        return list(pool.map(_evaluate_remote, scheds))

    try:
        base_cost, base_pax = evaluate([baseline])[0]
        root = Individual(baseline.copy(), base_pax, base_cost, next(seq))
        best = root
        trace: list[float] = []
        zero = config.generations == 0 or config.time_budget == 0
        if zero:
            return _result(best, root, 0, trace, t0)

        def out_of_budget(gen: int) -> bool:
            if config.generations is not None and gen >= config.generations:
                return True
            return config.time_budget is not None and time.perf_counter() - t0 >= config.time_budget

        loads = _flight_loads(base_pax)
        kids = [mut.mutate(baseline, loads) for _ in range(config.population - 1)]
        scored = evaluate([k for k, _ in kids])
        population = [root] + [Individual(s, pax, c, next(seq), (lab,)) for (s, lab), (c, pax) in zip(kids, scored)]
        population.sort(key=lambda ind: (ind.fitness, ind.seq))
        best = min(best, population[0], key=lambda ind: (ind.fitness, ind.seq))
        trace.append(best.fitness)
        if on_generation is not None:
            on_generation(0, population)
        gen = 0
        while not out_of_budget(gen):
            gen += 1
            n = len(population)
            weights = [n - r for r in range(n)]  # linear ranking, best first
            parents = rng.choices(population, weights=weights, k=config.parents)
            made = [mut.mutate(p.schedule, _flight_loads(p.assignment)) for p in parents]
            scored = evaluate([s for s, _ in made])
            children = [Individual(s, pax, c, next(seq), p.changes + (lab,))
                        for p, (s, lab), (c, pax) in zip(parents, made, scored)]
            population = sorted(population + children, key=lambda ind: (ind.fitness, ind.seq))[: config.population]
            if (population[0].fitness, population[0].seq) < (best.fitness, best.seq):
                best = population[0]
            trace.append(best.fitness)
            if on_generation is not None:
                on_generation(gen, population)
        return _result(best, root, gen, trace, t0)
    finally:
        if pool is not None:
            pool.shutdown()


def _result(best: Individual, root: Individual, gens: int, trace: list[float], t0: float) -> EvolutionResult:
    sched = best.schedule.copy()
    sched.objective = best.schedule_cost
    return EvolutionResult(sched, best.assignment, best.fitness, root.fitness, root.assignment.cost, gens, trace,
                           time.perf_counter() - t0)
