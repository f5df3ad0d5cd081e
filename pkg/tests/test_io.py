import csv
import io
import shutil

import pytest
from hypothesis import given, settings, strategies as st

from helpers import make_instance
from irops import demo_dir
from irops.acr import AcrConfig, run_acr
from irops.generator import generate_instance, tier_config
from irops.io import (ChangeOrder, InstanceFormatError, apply_orders, dumps_orders, loads_orders, read_instance,
                      write_instance, write_plan)
from irops.model import FlightPlan, apply_disruptions
from irops.paxr import assign_itineraries

seeds = st.integers(min_value=1, max_value=10_000)


@settings(max_examples=15, deadline=None)
@given(seeds, st.sampled_from(["tiny", "small", "medium"]), st.sampled_from(["tables", "json"]))
def test_read_write_round_trip(tmp_path_factory, seed, tier, fmt):
    inst = generate_instance(tier_config(tier, seed))
    target = tmp_path_factory.mktemp("rt") / ("inst.json" if fmt == "json" else "inst")
    write_instance(inst, target, fmt)
    assert read_instance(target) == inst


def test_demo_round_trips_through_json(demo, tmp_path):
    write_instance(demo, tmp_path / "demo.json")
    with open(tmp_path / "demo.json") as fh:
        assert read_instance(fh) == demo


def test_missing_duration_names_flight_and_field(tmp_path):
    shutil.copytree(demo_dir(), tmp_path / "demo")
    path = tmp_path / "demo" / "flights.csv"
    rows = list(csv.reader(path.open()))
    col = rows[0].index("duration")
    victim = rows[3][0]
    rows[3][col] = ""
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    with pytest.raises(InstanceFormatError) as err:
        read_instance(tmp_path / "demo")
    assert victim in str(err.value) and "duration" in str(err.value)


def test_bundled_example_shape(demo):
    c = demo.counts()
    assert (c["airports"], c["aircraft"], c["crew_groups"], c["flights"]) == (7, 3, 5, 14)
    assert len(demo.disruptions) == 2


def test_unchanged_schedule_has_no_orders(demo_state):
    assert write_plan(demo_state, demo_state.baseline.copy()) == []


def test_one_delay_is_one_order():
    inst = make_instance([("F1", "A", "B", 100, 60, "P1", "C1")])
    state = apply_disruptions(inst)
    sched = state.baseline.copy()
    sched.flights["F1"] = FlightPlan(120, "P1", "C1")
    assert write_plan(state, sched) == [ChangeOrder("delay", "F1", 100, {"departure": 120})]


def test_aircraft_swap_is_one_order_per_chain():
    inst = make_instance([("F1", "A", "B", 100, 60, "P1", "C1"), ("F2", "B", "A", 200, 60, "P1", "C1"),
                          ("G1", "A", "B", 110, 60, "P2", "C2"), ("G2", "B", "A", 210, 60, "P2", "C2")])
    state = apply_disruptions(inst)
    sched = state.baseline.copy()
    for fid, ac in (("F1", "P2"), ("F2", "P2"), ("G1", "P1"), ("G2", "P1")):
        p = sched.flights[fid]
        sched.flights[fid] = FlightPlan(p.departure, ac, p.crew)
    orders = write_plan(state, sched)
    assert [o.kind for o in orders] == ["aircraft-swap", "aircraft-swap"]
    assert sorted(tuple(o.details["flights"]) for o in orders) == [("F1", "F2"), ("G1", "G2")]


@settings(max_examples=10, deadline=None)
@given(seeds, st.sampled_from(["tiny", "small"]), st.sampled_from(["json", "csv"]))
def test_replaying_orders_reproduces_the_plan(seed, tier, fmt):
    state = apply_disruptions(generate_instance(tier_config(tier, seed)))
    sched = run_acr(state, AcrConfig(max_iterations=2, backend="builtin"))
    pax = assign_itineraries(sched, state)
    text = dumps_orders(write_plan(state, sched, pax), fmt)
    replayed, groups = apply_orders(state, loads_orders(text, fmt))
    assert replayed.same_plan(sched)
    assert groups.groups == pax.groups


def test_generator_is_seed_deterministic():
    assert generate_instance(tier_config("medium", 5)) == generate_instance(tier_config("medium", 5))
    assert generate_instance(tier_config("medium", 5)) != generate_instance(tier_config("medium", 6))


def test_generator_reaches_the_largest_benchmark_scale():
    c = generate_instance(tier_config("large", 1)).counts()
    assert (c["airports"], c["aircraft"], c["crew_groups"], c["flights"]) == (35, 85, 162, 608)
    assert (c["slotted_airports"], c["multileg"], c["maintenances"], c["slots"]) == (25, 4, 3, 1478)
    assert c["flight_disruptions"] == 63


def test_generator_without_disruptions_matches_the_plan():
    state = apply_disruptions(generate_instance(tier_config("small", 2, disruptions=0)))
    assert state.baseline.same_plan(state.original)


def test_orders_csv_and_json_agree(demo_state):
    sched = demo_state.baseline.copy()
    p = sched.flights["1010"]
    sched.flights["1010"] = FlightPlan(p.departure + 15, p.aircraft, p.crew)
    orders = write_plan(demo_state, sched)
    assert loads_orders(dumps_orders(orders, "csv"), "csv") == loads_orders(dumps_orders(orders, "json"))
    assert io.StringIO(dumps_orders(orders, "csv")).readline().startswith("kind,target,time")
