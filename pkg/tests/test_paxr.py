import itertools
import os
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from helpers import cancel, itinerary, make_instance
from irops.acr import AcrConfig, run_acr
from irops.feasibility import check_feasibility
from irops.generator import generate_instance, tier_config
from irops.model import CabinClass, PaxGroup, apply_disruptions, baseline_assignment
from irops.paxr import (GaConfig, Network, _Work, assign_fixed, assign_itineraries, capacity_violations, evolve,
                        passenger_cost, seat_capacity)

seeds = st.integers(min_value=1, max_value=10_000)
E = CabinClass.ECONOMY


def _loads_from_scratch(assignment):
    loads = {}
    for groups in assignment.groups.values():
        for g in groups:
            for fid, cabin in g.segments:
                loads[(fid, cabin)] = loads.get((fid, cabin), 0) + g.count
    return loads


def _within_capacity(assignment, schedule, inst):
    seats = {}
    for f in inst.flights:
        flying = schedule.flights.get(f.id) is not None
        for c in CabinClass:
            seats[(f.id, c)] = f.seats[c] if flying else 0
    return all(n <= seats[key] for key, n in _loads_from_scratch(assignment).items())


def test_undisrupted_passengers_keep_their_bookings():
    inst = generate_instance(tier_config("small", 12, disruptions=0))
    state = apply_disruptions(inst)
    pax = assign_itineraries(state.baseline, state)
    assert pax.groups == baseline_assignment(inst).groups
    assert pax.cost == 0


def _reroute_instance(order=("I1",)):
    flights = [("F1", "A", "C", 100, 60, "P1", "C1"), ("F2", "A", "B", 120, 40, "P2", "C2"),
               ("F3", "B", "C", 190, 40, "P2", "C2"), ("F4", "A", "C", 250, 60, "P3", "C3")]
    return make_instance(flights, itineraries=[itinerary("I1", 5, "F1")], disruptions=[cancel("F1")])


def _brute_force_earliest(schedule, inst, origin, ready, dest, transit):
    operated = [f for f in inst.flights if schedule.flights.get(f.id) is not None]
    best = None
    for n in (1, 2):
        for chain in itertools.permutations(operated, n):
            t, here, ok = ready, origin, True
            for k, f in enumerate(chain):
                dep = schedule.flights[f.id].departure
                if f.origin != here or dep < t:
                    ok = False
                    break
                t, here = dep + f.duration + transit, f.destination
            if ok and here == dest:
                arr = t - transit
                if best is None or arr < best[0]:
                    best = (arr, [f.id for f in chain])
    return best


def test_canceled_booking_takes_the_earliest_arriving_path():
    inst = _reroute_instance()
    state = apply_disruptions(inst)
    pax = assign_itineraries(state.baseline, state)
    arr, path = _brute_force_earliest(state.baseline, inst, "A", 100, "C", transit=20)
    (g,) = pax.groups["I1"]
    assert [f for f, _ in g.segments] == path == ["F2", "F3"]
    assert g.count == 5 and g.delivered


@pytest.mark.parametrize("order", [("low", "high"), ("high", "low")])
def test_contested_seat_goes_to_the_costlier_itinerary(order):
    its = {"low": itinerary("low", 1, "F1", cancellation=300.0), "high": itinerary("high", 1, "F1", cancellation=900.0)}
    inst = make_instance([("F1", "A", "B", 100, 60, "P1", "C1")], itineraries=[its[k] for k in order],
                         seats={"F1": (1, 0, 0)})
    state = apply_disruptions(inst)
    pax = assign_itineraries(state.baseline, state)
    assert pax.delivered("high") == 1 and pax.delivered("low") == 0


def _past_instance(extra_seats=(100, 10, 10), disrupt=True):
    # F0 is flown before recovery starts at 300; the connection F1 is canceled
    flights = [("F0", "A", "B", 100, 60, "P1", "C1"), ("F1", "B", "C", 400, 60, "P1", "C1"),
               ("F2", "B", "C", 500, 60, "P2", "C2")]
    return make_instance(flights, anchors=(300, 300, 2000, 180), itineraries=[itinerary("I1", 4, "F0", "F1"),
                                                                               itinerary("I0", 3, "F0")],
                         disruptions=[cancel("F1")] if disrupt else [], seats={"F2": extra_seats})


def test_itinerary_flown_before_recovery_is_untouched():
    state = apply_disruptions(_past_instance())
    pax = assign_itineraries(state.baseline, state)
    assert pax.groups["I0"] == (PaxGroup(3, (("F0", E),)),)


def test_broken_suffix_keeps_the_flown_prefix():
    state = apply_disruptions(_past_instance())
    pax = assign_itineraries(state.baseline, state)
    assert pax.groups["I1"] == (PaxGroup(4, (("F0", E), ("F2", E))),)


def test_broken_suffix_without_seats_is_stranded_with_its_prefix():
    state = apply_disruptions(_past_instance(extra_seats=(0, 0, 0)))
    pax = assign_itineraries(state.baseline, state)
    assert pax.groups["I1"] == (PaxGroup(4, (("F0", E),), delivered=False),)


def test_no_capacity_anywhere_leaves_passengers_unassigned():
    inst = make_instance([("F1", "A", "C", 100, 60, "P1", "C1"), ("F2", "A", "C", 200, 60, "P2", "C2")],
                         itineraries=[itinerary("I1", 5, "F1")], disruptions=[cancel("F1")], seats={"F2": (0, 0, 0)})
    state = apply_disruptions(inst)
    pax = assign_itineraries(state.baseline, state)
    assert pax.groups["I1"] == (PaxGroup(5, (), delivered=False),)
    assert pax.cost == 5 * 300.0


def test_downgrade_only_when_the_booked_cabin_is_full():
    inst = make_instance([("F1", "A", "C", 100, 60, "P1", "C1"), ("F2", "A", "C", 200, 60, "P2", "C2")],
                         itineraries=[itinerary("I1", 2, "F1", cabin=CabinClass.BUSINESS)],
                         disruptions=[cancel("F1")], seats={"F2": (10, 10, 1)})
    state = apply_disruptions(inst)
    pax = assign_itineraries(state.baseline, state)
    cabins = sorted((g.segments[0][1], g.count) for g in pax.groups["I1"])
    assert cabins == [(CabinClass.PREMIUM, 1), (CabinClass.BUSINESS, 1)]
    assert pax.cost == pytest.approx(passenger_cost(pax, state.baseline, inst))


def _acr(tier, seed):
    state = apply_disruptions(generate_instance(tier_config(tier, seed)))
    return state, run_acr(state, AcrConfig(max_iterations=2, backend="builtin"))


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from(["tiny", "small", "medium", "slack"]))
def test_assignment_never_overfills_and_keeps_prefixes(seed, tier):
    inst = generate_instance(tier_config(tier, seed, current_time_offset=120))
    state = apply_disruptions(inst)
    sched = run_acr(state, AcrConfig(max_iterations=2, backend="builtin"))
    pax = assign_itineraries(sched, state)
    assert _within_capacity(pax, sched, inst)
    assert capacity_violations(pax, sched, inst) == []
    assert pax.cost == pytest.approx(passenger_cost(pax, sched, inst))
    # every passenger is accounted for exactly once
    for it in inst.itineraries:
        assert sum(g.count for g in pax.groups[it.id]) == it.passenger_count
    # later passes never touch what the first pass placed
    work = _Work(state, sched, seat_capacity(sched, inst), {it.id: [] for it in inst.itineraries},
                 Network(sched, inst, inst.anchors.recovery_start), 3)
    begun = [it for it in inst.itineraries
             if sched.flights.get(it.legs[0].flight) is not None
             and sched.flights[it.legs[0].flight].departure < inst.anchors.recovery_start]
    assign_fixed(work, begun)
    for it in begun:
        assert pax.groups[it.id] == tuple(work.groups[it.id])


def test_zero_budget_returns_the_baseline():
    state, sched = _acr("small", 3)
    res = evolve(state, sched, GaConfig(generations=0))
    assert res.schedule.same_plan(sched)
    assert res.assignment.groups == assign_itineraries(sched, state).groups
    assert res.generations == 0 and res.fitness == res.initial_fitness


@settings(max_examples=6, deadline=None)
@given(seeds, st.sampled_from(["small", "slack"]))
def test_evolution_is_elitist_feasible_and_capacity_safe(seed, tier):
    state, sched = _acr(tier, seed)
    inst = state.instance

    def check(gen, population):
        for ind in population:
            assert check_feasibility(ind.schedule, state) == []
            assert _within_capacity(ind.assignment, ind.schedule, inst)

    res = evolve(state, sched, GaConfig(generations=4, seed=seed), on_generation=check)
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))
    assert res.fitness <= res.initial_fitness


def test_evolution_is_reproducible():
    state, sched = _acr("slack", 2)
    finals = []
    for _ in range(2):
        last = {}
        evolve(state, sched, GaConfig(generations=3, seed=5), on_generation=lambda g, pop: last.update(pop=pop))
        finals.append([(ind.fitness, ind.schedule.flights, ind.assignment.groups) for ind in last["pop"]])
    assert finals[0] == finals[1]


def test_worker_processes_match_in_process_evaluation():
    state, sched = _acr("small", 9)
    a = evolve(state, sched, GaConfig(generations=2, seed=1, workers=1))
    b = evolve(state, sched, GaConfig(generations=2, seed=1, workers=2))
    assert a.trace == b.trace and a.schedule.same_plan(b.schedule)


@pytest.mark.skipif(not os.environ.get("IROPS_LARGE"), reason="set IROPS_LARGE=1 for the largest tier")
def test_largest_tier_generation_throughput():
    state = apply_disruptions(generate_instance(tier_config("large", 1)))
    sched = run_acr(state, AcrConfig(backend="highs", max_iterations=1))
    res = evolve(state, sched, GaConfig(time_budget=240.0))
    print(f"large-1: {res.generations} generations in {res.seconds:.0f} s")
    assert res.generations >= 100
