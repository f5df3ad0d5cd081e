from collections import Counter, defaultdict

from hypothesis import given, settings, strategies as st

from helpers import make_instance
from irops.generator import generate_instance, tier_config
from irops.model import apply_disruptions
from irops.search import OptionKind, SolutionFeedback, build_initial_space, expand_space
from irops.tsn import (ARCS_PER_OPTION, ArcKind, Balance, Router, TimeSpaceNetwork, arc_bound, build_tsn,
                       ground_arc_pass, sanitize)

seeds = st.integers(min_value=1, max_value=10_000)
tiers = st.sampled_from(["tiny", "small", "medium"])


def _network(state):
    return build_tsn(build_initial_space(state), state)


def _place(tsn, idx):
    return tsn.nodes[idx].place


def test_crew_already_aboard_needs_no_embark():
    # F0 is in the past, so the crew enters the horizon still aboard P1 at B
    inst = make_instance([("F0", "A", "B", 10, 60, "P1", "C1"), ("F1", "B", "A", 200, 60, "P1", "C1")],
                         anchors=(50, 50, 2000, 180))
    state = apply_disruptions(inst)
    assert state.crew_start["C1"].aboard == "P1"
    tsn = _network(state)
    planned = next(o for o in tsn.space.groups["F1"] if o.kind is OptionKind.SCHEDULED)
    flights = [a for a in tsn.arcs if a.kind is ArcKind.FLIGHT and a.option == planned]
    assert len(flights) == 2 and len({a.var for a in flights}) == 1
    assert {tsn.nodes[a.tail].network for a in flights} == {"aircraft:P1", "crew:C1"}
    crew_arc = next(a for a in flights if tsn.nodes[a.tail].network == "crew:C1")
    path = Router(tsn).route("crew:C1", [crew_arc])
    assert path is not None
    assert ArcKind.EMBARK not in {a.kind for a in path}
    assert {a.kind for a in tsn.arcs_of("crew:C1")} >= {ArcKind.INPUT, ArcKind.GROUND}


def test_two_leg_flight_gets_a_strict_sub_thread():
    inst = make_instance([("M1", "A", "B", 100, 60, "P1", "C1", "G", 0), ("M2", "B", "C", 180, 60, "P1", "C1", "G", 1),
                          ("S", "C", "A", 320, 60, "P1", "C1")])
    tsn = _network(apply_disruptions(inst))
    subs = [n for n in tsn.nodes if n.place[0] == "sub"]
    assert {n.network for n in subs} == {"aircraft:P1", "crew:C1"}
    assert all(n.balance is Balance.STRICT and n.place[1:] == ("G", 0) for n in subs)

    def shape(net):
        return Counter((a.option.entity, _place(tsn, a.tail)[0], _place(tsn, a.head)[0])
                       for a in tsn.arcs_of(net) if a.kind is ArcKind.FLIGHT)

    assert shape("aircraft:P1") == Counter({("M1", "airport", "sub"): 1, ("M2", "sub", "airport"): 1,
                                            ("S", "airport", "airport"): 1})
    assert shape("crew:C1") == Counter({("M1", "aboard", "sub"): 1, ("M2", "sub", "aboard"): 1,
                                        ("S", "aboard", "aboard"): 1})
    # boarding only before the first leg, leaving only after the last
    crew_kinds = Counter((a.kind, a.option.entity) for a in tsn.arcs_of("crew:C1")
                         if a.kind in (ArcKind.EMBARK, ArcKind.DISEMBARK))
    assert crew_kinds == Counter({(ArcKind.EMBARK, "M1"): 1, (ArcKind.DISEMBARK, "M2"): 1,
                                  (ArcKind.EMBARK, "S"): 1, (ArcKind.DISEMBARK, "S"): 1})


def test_example_aircraft_subnetwork_has_options_and_others(demo_state):
    tsn = _network(demo_state)
    arcs = tsn.arcs_of("aircraft:A#3")
    kinds = {a.kind for a in arcs}
    assert kinds <= {ArcKind.FLIGHT, ArcKind.GROUND, ArcKind.INPUT, ArcKind.MAINTENANCE, ArcKind.SINK}
    assert ArcKind.GROUND in kinds and ArcKind.INPUT in kinds
    options = {a.option for a in arcs if a.kind is ArcKind.FLIGHT}
    per_flight = Counter(o.entity for o in options)
    assert max(per_flight.values()) > 1  # several alternatives for the disrupted chain


def _bare_network(times):
    tsn = TimeSpaceNetwork(None, None)
    for t in times:
        tsn.node("aircraft:X", ("airport", "A"), t)
    return tsn


def test_ground_pass_single_node_makes_no_arc():
    assert ground_arc_pass(_bare_network([100])) == []


def test_ground_pass_chains_four_nodes_in_time_order():
    tsn = _bare_network([300, 100, 400, 200])
    arcs = ground_arc_pass(tsn)
    assert [(tsn.nodes[a.tail].time, tsn.nodes[a.head].time) for a in arcs] == [(100, 200), (200, 300), (300, 400)]
    assert len({a.var for a in arcs}) == 3


def test_example_ground_arcs_link_consecutive_nodes(demo_state):
    tsn = _network(demo_state)
    by_pos = defaultdict(list)
    for n in tsn.nodes:
        if n.place[0] != "void":
            by_pos[n.position].append(n.time)
    expected = {(pos, a, b) for pos, ts in by_pos.items() for a, b in zip(sorted(ts), sorted(ts)[1:])}
    got = {(tsn.nodes[a.tail].position, tsn.nodes[a.tail].time, tsn.nodes[a.head].time)
           for a in tsn.arcs if a.kind is ArcKind.GROUND}
    assert got == expected


def test_sanitize_is_injective_on_awkward_ids():
    ids = ["A#3", "A~23", "A_3", "A 3", "Ä3"]
    assert len({sanitize(i) for i in ids}) == len(ids)
    assert all(c.isalnum() or c in "_~" for c in "".join(sanitize(i) for i in ids))


@settings(max_examples=20, deadline=None)
@given(seeds, tiers, st.booleans())
def test_network_invariants(seed, tier, grow):
    state = apply_disruptions(generate_instance(tier_config(tier, seed)))
    space = build_initial_space(state)
    if grow:
        space = expand_space(space, SolutionFeedback(cancellations=tuple(state.decision_flights()[-3:])))
    tsn = build_tsn(space, state)

    # one shared variable on exactly two flight arcs per scheduled option
    flight_vars = Counter(a.var for a in tsn.arcs if a.kind is ArcKind.FLIGHT)
    for o in space.options():
        if o.kind is OptionKind.SCHEDULED:
            (v,) = tsn.decision[o.key]
            assert flight_vars[v] == 2
            nets = {tsn.nodes[a.tail].network.split(":")[0] for a in tsn.arcs if a.var == v}
            assert nets == {"aircraft", "crew"}

    for a in tsn.arcs:
        if a.kind is ArcKind.DISEMBARK:
            assert tsn.nodes[a.tail].time == tsn.nodes[a.head].time
            assert _place(tsn, a.head)[0] == "ground"

    for n in tsn.nodes:
        expected = {"sub": Balance.STRICT, "void": Balance.FREE}.get(n.place[0], Balance.INEQUALITY)
        assert n.balance is expected

    assert len(tsn.arcs) <= arc_bound(tsn)
    assert ARCS_PER_OPTION * space.size() + len(tsn.nodes) <= arc_bound(tsn)
