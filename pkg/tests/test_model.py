from dataclasses import replace

from hypothesis import given, settings, strategies as st

from helpers import delay, make_instance
from irops.generator import generate_instance, tier_config
from irops.model import (Disruption, DisruptionKind, FlightPlan, RecoverySchedule, apply_disruptions,
                         original_schedule, rotations, validate_instance)

seeds = st.integers(min_value=1, max_value=10_000)


def test_generated_instance_is_valid():
    assert validate_instance(generate_instance(tier_config("small", 7))) == []


def test_zero_crew_connection_is_one_diagnostic(demo):
    ap = demo.airports[0]
    bad = replace(demo, airports=(replace(ap, min_crew_connection=0),) + demo.airports[1:])
    diags = validate_instance(bad)
    assert len(diags) == 1
    assert diags[0].entity == ap.id and diags[0].field == "min_crew_connection"
    assert "disembark" in diags[0].rule


def test_multileg_out_of_order_is_reported_on_group():
    inst = generate_instance(tier_config("small", 1))
    group, legs = next(iter(inst.multileg_groups.items()))
    a, b = legs[0], legs[1]
    swapped = {a.id: replace(a, sched_departure=b.sched_departure), b.id: replace(b, sched_departure=a.sched_departure)}
    bad = replace(inst, flights=tuple(swapped.get(f.id, f) for f in inst.flights))
    assert any(d.entity == group and d.field == "legs" for d in validate_instance(bad))


def test_no_disruptions_keeps_the_plan(demo):
    state = apply_disruptions(replace(demo, disruptions=()))
    assert state.baseline.same_plan(state.original)
    assert not state.disrupted


def test_single_delay_shifts_only_that_flight():
    inst = make_instance([("F1", "A", "B", 100, 60, "P1", "C1"), ("F2", "B", "A", 200, 60, "P1", "C1")],
                         disruptions=[delay("F1", 30)])
    state = apply_disruptions(inst)
    assert state.baseline.flights["F1"] == FlightPlan(130, "P1", "C1")
    assert state.baseline.flights["F2"] == state.original.flights["F2"]


def test_unavailability_flags_overlapping_flights():
    inst = generate_instance(tier_config("small", 3, disruptions=0))
    ac = inst.aircraft[0].id
    t1, t2 = 600, 800
    inst = replace(inst, disruptions=(Disruption(DisruptionKind.AIRCRAFT_UNAVAILABILITY, ac, start=t1, end=t2),))
    state = apply_disruptions(inst)
    expected = {f.id for f in inst.flights
                if f.original_aircraft == ac and f.sched_departure < t2 and t1 < f.sched_arrival}
    assert expected
    assert expected <= set(state.disrupted)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_flights_after_recovery_finish_are_immutable(seed):
    inst = generate_instance(tier_config("small", seed))
    inst = replace(inst, anchors=replace(inst.anchors, recovery_finish=inst.anchors.recovery_start + 240))
    state = apply_disruptions(inst)
    for fid, plan in state.baseline.flights.items():
        if plan is not None and plan.departure > inst.anchors.recovery_finish:
            assert fid in state.immutable


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_apply_disruptions_is_idempotent(seed):
    inst = generate_instance(tier_config("small", seed))
    a, b = apply_disruptions(inst), apply_disruptions(inst)
    assert a.baseline.same_plan(b.baseline)
    assert (a.disrupted, a.removed, a.immutable) == (b.disrupted, b.removed, b.immutable)
    assert a.aircraft_start == b.aircraft_start and a.crew_start == b.crew_start


def test_rotations_sort_by_departure():
    sched = RecoverySchedule({"X": FlightPlan(300, "P", "C"), "Y": FlightPlan(100, "P", "C"), "Z": None})
    inst = make_instance([("X", "A", "B", 300, 30, "P", "C"), ("Y", "B", "A", 100, 30, "P", "C"),
                          ("Z", "A", "B", 500, 30, "P", "C")])
    by_ac, by_crew = rotations(sched, inst)
    assert by_ac["P"] == ["Y", "X"] and by_crew["C"] == ["Y", "X"]


def test_original_schedule_mirrors_the_instance(demo):
    sched = original_schedule(demo)
    assert all(sched.flights[f.id].departure == f.sched_departure for f in demo.flights)
