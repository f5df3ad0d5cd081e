import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import make_instance
from irops.acr import AcrConfig, run_acr
from irops.generator import generate_instance, tier_config
from irops.milp import (MilpModel, encode, export_model, fallback_assignment, model_from_lp, read_lp,
                        route_assignment, warm_start_from)
from irops.model import (Aircraft, Airport, CrewGroup, ProblemInstance, RecoverySchedule, Slot, TimeAnchors,
                         apply_disruptions)
from irops.search import OptionKind, SolutionFeedback, build_initial_space, expand_space
from irops.solver import solve
from irops.tsn import ArcKind, Balance, build_tsn

GOLDEN = Path(__file__).parent / "data" / "demo_iteration1.lp"
seeds = st.integers(min_value=1, max_value=10_000)
tiers = st.sampled_from(["tiny", "small", "medium"])


def _model(state, space=None, name="recovery"):
    space = space or build_initial_space(state)
    return encode(build_tsn(space, state), name=name)


def _value(model, outcome, name):
    return float(outcome.x[model.index[name]])


# -- flow balance


def test_flow_rows_are_strict_only_on_sub_threads():
    inst = make_instance([("M1", "A", "B", 100, 60, "P1", "C1", "G", 0), ("M2", "B", "C", 180, 60, "P1", "C1", "G", 1),
                          ("S", "C", "A", 320, 60, "P1", "C1")])
    model = _model(apply_disruptions(inst))
    tsn = model.network
    flow = {r.name: r for r in model.rows if r.tag == "flow"}
    for n in tsn.nodes:
        r = flow.get(f"flow_{n.index}")
        if n.balance is Balance.FREE:
            assert r is None
        elif r is not None:
            assert r.sense == ("=" if n.balance is Balance.STRICT else "<=")
    assert any(r.sense == "=" for r in flow.values())


def test_flow_rhs_counts_input_arcs(demo_state):
    model = _model(demo_state)
    tsn = model.network
    supply = {a.head for a in tsn.arcs if a.kind is ArcKind.INPUT}
    for r in model.rows:
        if r.tag == "flow":
            node = int(r.name.split("_")[1])
            assert r.rhs == (1.0 if node in supply else 0.0)


def test_sub_thread_balance_forces_whole_multileg():
    inst = make_instance([("M1", "A", "B", 100, 60, "P1", "C1", "G", 0), ("M2", "B", "C", 180, 60, "P1", "C1", "G", 1)])
    model = _model(apply_disruptions(inst))
    by_ent = {e: {o.kind: idx for o, idx in m} for e, m in model.groups.items()}
    x, problems = route_assignment(model, {"M1": next(o for o, _ in model.groups["M1"] if o.kind is OptionKind.SCHEDULED),
                                           "M2": next(o for o, _ in model.groups["M2"] if o.kind is OptionKind.CANCELED)})
    assert x is None and problems
    # flying M1 alone leaves one unit stranded on a strict node
    y = np.zeros(model.n_vars)
    y[by_ent["M1"][OptionKind.SCHEDULED]] = 1
    y[by_ent["M2"][OptionKind.CANCELED]] = 1
    assert any("flow_" in v for v in model.violations(y))


# -- exactly one option per group


def test_single_flight_keeps_its_plan():
    model = _model(apply_disruptions(make_instance([("F1", "A", "B", 100, 60, "P1", "C1")])))
    out = solve(model, "builtin")
    assert out.status == "optimal" and out.objective == 0
    assert model.chosen(out.x)["F1"].kind is OptionKind.SCHEDULED


def test_conflict_picks_the_cheaper_resolution():
    # F2 is planned to leave before F1 can turn around; no swap partner exists
    inst = make_instance([("F1", "A", "B", 100, 60, "P1", "C1"), ("F2", "B", "A", 170, 60, "P1", "C1")])
    state = apply_disruptions(inst)
    model = _model(state)
    out = solve(model, "builtin")
    picks = model.chosen(out.x)
    delays = [o for o, _ in model.groups["F2"] if o.kind is OptionKind.SCHEDULED and o.departure >= 190]
    best_delay = min(float(model.obj[idx[0]]) for o, idx in model.groups["F2"] if o in delays) if delays else None
    cancel_cost = state.costs.cancellation_per_flight
    expected = min(cancel_cost, best_delay) if best_delay is not None else cancel_cost
    assert out.objective == pytest.approx(expected)
    assert picks["F1"].kind is OptionKind.SCHEDULED


def test_uniq_rows_one_per_group(demo_state):
    model = _model(demo_state)
    uniq = [r for r in model.rows if r.tag == "uniq"]
    assert len(uniq) == len(model.groups)
    assert all(r.sense == "=" and r.rhs == 1 for r in uniq)


# -- slots


def _slotted(capacity, flights):
    slot = Slot("S1", "A", 60, 180, capacity, nonuse_penalty=100.0)
    return apply_disruptions(make_instance(flights, slots=[slot]))


def test_full_slot_has_no_nonuse():
    state = _slotted(1, [("F1", "A", "B", 100, 60, "P1", "C1")])
    model = _model(state)
    out = solve(model, "builtin")
    assert _value(model, out, "n_S1") == 0
    assert out.objective == 0


def test_underused_slot_pays_the_penalty():
    state = _slotted(3, [("F1", "A", "B", 100, 60, "P1", "C1"), ("F2", "A", "B", 110, 60, "P2", "C2")])
    model = _model(state)
    out = solve(model, "builtin")
    assert _value(model, out, "n_S1") == 1
    assert out.objective == pytest.approx(100.0)


def test_slot_row_counts_members_plus_nonuse():
    state = _slotted(2, [("F1", "A", "B", 100, 60, "P1", "C1")])
    model = _model(state)
    (r,) = [r for r in model.rows if r.tag == "slot"]
    members = [j for j in r.idx if j != model.nonuse["S1"]]
    sched = [idx[0] for o, idx in model.groups["F1"] if o.kind is OptionKind.SCHEDULED and 60 <= o.departure < 180]
    assert sorted(members) == sorted(sched)
    assert r.rhs == 2 and model.ub[model.nonuse["S1"]] == 2


# -- crew duty


def _duty_model():
    inst = make_instance([("F1", "A", "B", 100, 200, "P1", "C1"), ("F2", "B", "A", 330, 200, "P1", "C1"),
                          ("F3", "A", "B", 560, 200, "P1", "C1")], duty=480)
    return _model(apply_disruptions(inst))


def test_duty_limit_allows_at_most_two_of_three():
    model = _duty_model()
    (duty,) = [r for r in model.rows if r.tag == "duty"]
    base = model.network.state.baseline.flights
    planned = {e: next(o for o, _ in m if o.kind is OptionKind.SCHEDULED and o.departure == base[e].departure)
               for e, m in model.groups.items()}
    canceled = {e: next(o for o, _ in m if o.kind is OptionKind.CANCELED) for e, m in model.groups.items()}
    feasible = []
    for picks in itertools.product([False, True], repeat=3):
        chosen = {e: (planned[e] if fly else canceled[e]) for e, fly in zip(("F1", "F2", "F3"), picks)}
        x, problems = route_assignment(model, chosen)
        flown = sum(picks)
        lhs = 200.0 * flown
        assert (lhs <= duty.rhs) == (flown <= 2)
        if x is not None:
            feasible.append(flown)
        elif flown == 3:
            assert any(p.startswith("row duty_") for p in problems)
    assert feasible and max(feasible) == 2
    out = solve(model, "builtin")
    assert sum(o.kind is OptionKind.SCHEDULED for o in model.chosen(out.x).values()) == 2


def test_duty_rows_one_per_crew(demo_state, demo):
    model = _model(demo_state)
    assert sum(r.tag == "duty" for r in model.rows) == len(demo.crew_groups)


def test_duty_row_weights_are_flight_minutes():
    model = _duty_model()
    (duty,) = [r for r in model.rows if r.tag == "duty"]
    assert duty.sense == "<=" and duty.rhs == 480
    want = {idx[0]: 200.0 for m in model.groups.values() for o, idx in m
            if o.kind is OptionKind.SCHEDULED and o.crew == "C1"}
    assert dict(zip(duty.idx, duty.coef)) == want


# -- warm starts


def test_baseline_warm_start_selects_as_planned(demo_state):
    model = _model(demo_state)
    ws = warm_start_from(demo_state.baseline, model)
    base = demo_state.baseline.flights
    for ent, members in model.groups.items():
        plan = base.get(ent)
        for o, idx in members:
            as_planned = (o.kind is OptionKind.SCHEDULED and plan is not None
                          and (o.departure, o.aircraft, o.crew) == (plan.departure, plan.aircraft, plan.crew))
            if as_planned:
                assert ws.values.get(idx[0]) == 1.0


def test_warm_start_carries_the_objective_forward():
    state = apply_disruptions(generate_instance(tier_config("small", 11)))
    space = build_initial_space(state)
    model = _model(state, space)
    out = solve(model, "builtin")
    from irops.acr import interpret_solution

    sched, fb = interpret_solution(out, model.network)
    grown = expand_space(space, SolutionFeedback(cancellations=tuple(state.decision_flights()[-2:])))
    ws = warm_start_from(sched, _model(state, grown))
    assert ws.complete
    assert ws.objective == pytest.approx(out.objective)


def test_empty_schedule_gives_empty_warm_start():
    inst = ProblemInstance(TimeAnchors(0, 0, 600, 60), (Airport("A", 30, 20, 20),), (Aircraft("P1", "A", 0),),
                           (CrewGroup("C1", "A", 0, 480),), ())
    model = _model(apply_disruptions(inst))
    ws = warm_start_from(RecoverySchedule({}), model)
    assert ws.values == {} and ws.complete


# -- interchange text


def test_one_variable_model_text():
    m = MilpModel(["x"], np.zeros(1), np.ones(1), np.ones(1, dtype=bool), np.array([2.0]), [], name="one")
    assert export_model(m) == "\\ one: 1 variables, 0 constraints\nMinimize\n obj: + 2 x\nSubject To\nBounds\n" \
                              "Binaries\n x\nEnd\n"


def test_example_model_matches_golden_text(demo_state):
    assert export_model(_model(demo_state, name="example-14-it1")) == GOLDEN.read_text()


def test_every_family_tag_appears():
    state = apply_disruptions(generate_instance(tier_config("medium", 3)))
    text = export_model(_model(state))
    for tag in ("flow_", "uniq_", "slot_", "duty_"):
        assert f"\n {tag}" in text


@settings(max_examples=10, deadline=None)
@given(seeds, tiers)
def test_lp_text_round_trip(seed, tier):
    state = apply_disruptions(generate_instance(tier_config(tier, seed)))
    model = _model(state)
    back = model_from_lp(read_lp(export_model(model)))
    assert back.names == model.names
    assert np.array_equal(back.obj, model.obj) and np.array_equal(back.ub, model.ub)
    assert np.array_equal(back.integer, model.integer)
    assert (back.matrix()[0] != model.matrix()[0]).nnz == 0


# -- structural invariants


@settings(max_examples=20, deadline=None)
@given(seeds, tiers)
def test_cancel_everything_is_always_feasible(seed, tier):
    state = apply_disruptions(generate_instance(tier_config(tier, seed)))
    model = _model(state)
    tsn = model.network
    x = np.zeros(model.n_vars)
    for ent, members in model.groups.items():
        for o, idx in members:
            if o.kind is OptionKind.CANCELED:
                x[idx[0]] = 1
            elif o.kind is OptionKind.FAILING:
                # stop the aircraft where it enters the horizon; every other arc stays empty
                net = f"aircraft:{state.instance.maintenance[ent].aircraft}"
                sink = next(a for a in tsn.arcs if a.kind is ArcKind.SINK and a.option == o
                            and a.tail == tsn.input_node[net])
                x[model.index[sink.var]] = 1
    for sid, j in model.nonuse.items():
        x[j] = model.ub[j]
    assert model.violations(x) == []
    assert fallback_assignment(model) is not None


@settings(max_examples=15, deadline=None)
@given(seeds, tiers)
def test_family_counts_and_zero_objective(seed, tier):
    state = apply_disruptions(generate_instance(tier_config(tier, seed)))
    model = _model(state)
    c = model.counts()
    assert c["uniq"] == len(model.groups)
    assert c.get("slot", 0) == len(model.network.slot_choices)
    assert c["duty"] == len(state.instance.crew_groups)
    out = solve(model, "builtin")
    assert out.objective >= 0
    chosen = model.chosen(out.x)
    clean = all(o.kind in (OptionKind.SCHEDULED, OptionKind.SUCCEEDING) and model.obj[idx[0]] == 0
                for ent, members in model.groups.items() for o, idx in members if o == chosen[ent])
    slots_clean = all(out.x[j] * model.obj[j] == 0 for j in model.nonuse.values())
    assert (abs(out.objective) < 1e-9) == (clean and slots_clean)


def test_acr_objective_on_undisrupted_instance_is_zero():
    state = apply_disruptions(generate_instance(tier_config("small", 5, disruptions=0)))
    result = run_acr(state, AcrConfig(backend="builtin"))
    assert result.objective == 0 and result.same_plan(state.baseline)
    assert len(result.iteration_log) == 1
