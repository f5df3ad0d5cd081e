"""Time-space network built from a search space.

Every aircraft and every crew group owns a subnetwork. Aircraft positions
are airports plus one sub-thread per multileg transit. Crew positions are
"on the ground at an airport", "aboard aircraft a at an airport" and the
crew-side sub-threads. A single Void node feeds the input arcs and absorbs
the sink arcs of failed maintenance.

Nodes are identified by (network, place, time) and reused when those
coincide. Ground arcs are added last by chaining the nodes of each position
in time order (ties broken by creation order).
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .model import DisruptedState, Flight
from .search import OptionChoice, OptionKind, SearchSpace, SlotChoice


class ArcKind(str, enum.Enum):
    FLIGHT = "flight"
    GROUND = "ground"
    INPUT = "input"
    EMBARK = "embark"
    DISEMBARK = "disembark"
    MAINTENANCE = "maintenance"
    SINK = "sink"
    CANCEL_VIRTUAL = "cancel-virtual"


class Balance(str, enum.Enum):
    STRICT = "strict-equality"
    INEQUALITY = "inequality"
    FREE = "unconstrained"


VOID = "void"


@dataclass(frozen=True)
class Node:
    index: int
    network: str  # "aircraft:<id>", "crew:<id>" or "void"
    place: tuple  # ("airport", p) | ("ground", p) | ("aboard", a, p) | ("sub", group, k) | ("void",)
    time: int
    balance: Balance

    @property
    def position(self) -> tuple:
        return (self.network, self.place)


@dataclass(frozen=True)
class Arc:
    index: int
    kind: ArcKind
    tail: int
    head: int
    var: Optional[str]  # None: fixed flow of one (input arcs)
    option: Optional[OptionChoice] = None


class NetworkError(ValueError):
    pass


# Each scheduled option yields at most four arcs (two flight arcs, embark and
# disembark); sinks add at most three per option per maintenance of the
# aircraft (its two main-thread nodes plus the maintenance arc's nodes), and
# ground plus input arcs never exceed the node count.
ARCS_PER_OPTION = 4
SINKS_PER_OPTION = 3


def sanitize(ident: str) -> str:
    """Identifier safe for interchange-format variable names; injective."""
    return "".join(ch if (ch.isascii() and ch.isalnum()) or ch == "_" else f"~{ord(ch):02x}" for ch in ident)


def option_var(opt: OptionChoice) -> str:
    return f"o_{sanitize(opt.entity)}_{opt.ordinal}"


@dataclass
class TimeSpaceNetwork:
    state: DisruptedState
    space: SearchSpace
    nodes: list[Node] = field(default_factory=list)
    arcs: list[Arc] = field(default_factory=list)
    void: int = 0
    input_node: dict[str, int] = field(default_factory=dict)  # network -> node
    # decision expression of each option: the variables whose sum equals its selection
    decision: dict[tuple, list[str]] = field(default_factory=dict)
    slot_choices: list[SlotChoice] = field(default_factory=list)
    debug: bool = False

    def __post_init__(self):
        self._node_at: dict[tuple, int] = {}
        self._counter = defaultdict(int)

    # -- node and arc helpers
    def node(self, network: str, place: tuple, t: int) -> int:
        key = (network, place, t)
        idx = self._node_at.get(key)
        if idx is None:
            if place[0] == "void":
                bal = Balance.FREE
            elif place[0] == "sub":
                bal = Balance.STRICT
            else:
                bal = Balance.INEQUALITY
            idx = len(self.nodes)
            self.nodes.append(Node(idx, network, place, t, bal))
            self._node_at[key] = idx
        return idx

    def _var(self, prefix: str) -> str:
        n = self._counter[prefix]
        self._counter[prefix] += 1
        return f"{prefix}_{n}"

    def arc(self, kind: ArcKind, tail: int, head: int, var: Optional[str], option=None) -> Arc:
        a = Arc(len(self.arcs), kind, tail, head, var, option)
        self.arcs.append(a)
        return a

    # -- queries
    @property
    def options(self) -> dict[str, list[OptionChoice]]:
        return self.space.groups

    def subnetworks(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = defaultdict(list)
        for n in self.nodes:
            out[n.network].append(n.index)
        return dict(out)

    def arcs_of(self, network: str) -> list[Arc]:
        return [a for a in self.arcs if self.nodes[a.tail].network == network
                or (a.kind is ArcKind.INPUT and self.nodes[a.head].network == network)]

    def variables(self) -> list[str]:
        """All decision variable names in deterministic order (options first)."""
        seen, out = set(), []
        for opts in self.space.groups.values():
            for o in opts:
                for v in self.decision[o.key]:
                    if v not in seen:
                        seen.add(v)
                        out.append(v)
        for a in self.arcs:
            if a.var is not None and a.var not in seen:
                seen.add(a.var)
                out.append(a.var)
        return out

    def counts(self) -> dict[str, int]:
        c: dict[str, int] = defaultdict(int)
        for a in self.arcs:
            c[a.kind.value] += 1
        return {"nodes": len(self.nodes), "arcs": len(self.arcs), **dict(sorted(c.items()))}

    def dump(self) -> dict:
        """Plain listing of nodes and arcs, stable across runs."""
        return {
            "nodes": [{"id": n.index, "network": n.network, "place": list(n.place), "time": n.time,
                       "balance": n.balance.value} for n in self.nodes],
            "arcs": [{"id": a.index, "kind": a.kind.value, "tail": a.tail, "head": a.head, "var": a.var,
                      "option": str(a.option) if a.option else None} for a in self.arcs],
        }


def _net(kind: str, ident: str) -> str:
    return f"{kind}:{ident}"


def build_tsn(space: SearchSpace, state: DisruptedState, debug: bool = False) -> TimeSpaceNetwork:
    """Materialize the network for every option in ``space``."""
    inst = state.instance
    tsn = TimeSpaceNetwork(state, space, debug=debug)
    tsn.void = tsn.node(VOID, ("void",), 0)

    for ac in inst.aircraft:
        sp = state.aircraft_start[ac.id]
        net = _net("aircraft", ac.id)
        head = tsn.node(net, ("airport", sp.airport), sp.time)
        tsn.input_node[net] = head
        tsn.arc(ArcKind.INPUT, tsn.void, head, None)
    for cg in inst.crew_groups:
        sp = state.crew_start[cg.id]
        net = _net("crew", cg.id)
        place = ("aboard", sp.aboard, sp.airport) if sp.aboard else ("ground", sp.airport)
        head = tsn.node(net, place, sp.time)
        tsn.input_node[net] = head
        tsn.arc(ArcKind.INPUT, tsn.void, head, None)

    failing: list[OptionChoice] = []
    for entity, opts in space.groups.items():
        for o in opts:
            if o.kind is OptionKind.SCHEDULED:
                _scheduled_arcs(tsn, state, o)
            elif o.kind is OptionKind.SUCCEEDING:
                m = inst.maintenance[o.entity]
                net = _net("aircraft", m.aircraft)
                v = option_var(o)
                tsn.arc(ArcKind.MAINTENANCE, tsn.node(net, ("airport", o.airport), o.start),
                        tsn.node(net, ("airport", o.airport), o.start + m.duration), v, o)
                tsn.decision[o.key] = [v]
            elif o.kind is OptionKind.CANCELED:
                v = option_var(o)
                tsn.decision[o.key] = [v]
                if debug:
                    tsn.arc(ArcKind.CANCEL_VIRTUAL, tsn.void, tsn.void, v, o)
            else:
                failing.append(o)

    # failing maintenance: stop the aircraft at any main-thread node before the deadline
    for o in failing:
        m = inst.maintenance[o.entity]
        net = _net("aircraft", m.aircraft)
        inp = tsn.input_node[net]
        sinks = []
        for n in list(tsn.nodes):
            if n.network == net and n.place[0] == "airport" and (n.time <= m.latest_start or n.index == inp):
                v = f"s_{sanitize(m.id)}_{len(sinks)}"
                tsn.arc(ArcKind.SINK, n.index, tsn.void, v, o)
                sinks.append(v)
        tsn.decision[o.key] = sinks

    ground_arc_pass(tsn)
    tsn.slot_choices = space.slot_choices()
    return tsn


def _scheduled_arcs(tsn: TimeSpaceNetwork, state: DisruptedState, o: OptionChoice) -> None:
    inst = state.instance
    if o.aircraft not in inst.aircraft_by_id or o.crew not in inst.crew:
        raise NetworkError(f"option {o} refers to a resource with no subnetwork")
    f: Flight = inst.flight[o.entity]
    into_transit, from_transit = state.inner_leg(f)
    arr = o.departure + f.duration
    ap_origin, ap_dest = inst.airport[f.origin], inst.airport[f.destination]
    anet, cnet = _net("aircraft", o.aircraft), _net("crew", o.crew)
    g = f.multileg_group
    v = option_var(o)

    # aircraft side: the arrival node carries the ground time needed before the next use
    if from_transit:
        a_tail = tsn.node(anet, ("sub", g, f.leg_index - 1), o.departure)
    else:
        a_tail = tsn.node(anet, ("airport", f.origin), o.departure)
    if into_transit:
        a_head = tsn.node(anet, ("sub", g, f.leg_index), arr + ap_dest.min_transit)
    else:
        a_head = tsn.node(anet, ("airport", f.destination), arr + ap_dest.min_turnaround)
    tsn.arc(ArcKind.FLIGHT, a_tail, a_head, v, o)

    # crew side shares the decision variable
    if from_transit:
        c_tail = tsn.node(cnet, ("sub", g, f.leg_index - 1), o.departure)
    else:
        c_tail = tsn.node(cnet, ("aboard", o.aircraft, f.origin), o.departure)
        board = tsn.node(cnet, ("ground", f.origin), o.departure - ap_origin.min_crew_connection)
        tsn.arc(ArcKind.EMBARK, board, c_tail, tsn._var("e"), o)
    if into_transit:
        c_head = tsn.node(cnet, ("sub", g, f.leg_index), arr)
    else:
        c_head = tsn.node(cnet, ("aboard", o.aircraft, f.destination), arr)
        tsn.arc(ArcKind.DISEMBARK, c_head, tsn.node(cnet, ("ground", f.destination), arr), tsn._var("d"), o)
    tsn.arc(ArcKind.FLIGHT, c_tail, c_head, v, o)
    tsn.decision[o.key] = [v]


def ground_arc_pass(tsn: TimeSpaceNetwork) -> list[Arc]:
    """Chain consecutive nodes of every position with independent ground arcs."""
    by_pos: dict[tuple, list[Node]] = defaultdict(list)
    for n in tsn.nodes:
        if n.place[0] != "void":
            by_pos[n.position].append(n)
    out = []
    for pos in sorted(by_pos, key=lambda p: by_pos[p][0].index):
        seq = sorted(by_pos[pos], key=lambda n: (n.time, n.index))
        for a, b in zip(seq, seq[1:]):
            out.append(tsn.arc(ArcKind.GROUND, a.index, b.index, tsn._var("g")))
    return out


def arc_bound(tsn: TimeSpaceNetwork) -> int:
    """Upper bound on the arc count that construction must respect."""
    inst = tsn.state.instance
    per_ac: dict[str, int] = defaultdict(int)
    for m in inst.maintenances:
        per_ac[m.aircraft] += 1
    most = max(per_ac.values(), default=0)
    n_opts = tsn.space.size()
    return (ARCS_PER_OPTION + SINKS_PER_OPTION * most) * n_opts + len(tsn.nodes) + (n_opts if tsn.debug else 0)


# --------------------------------------------------------------------------
# routing one unit of flow through a subnetwork


FREE_KINDS = (ArcKind.GROUND, ArcKind.EMBARK, ArcKind.DISEMBARK)


class Router:
    """Finds a single flow path through one subnetwork covering required arcs.

    Used to complete warm starts and by the enumeration oracle; it works on
    the network directly and shares nothing with the LP machinery.
    """

    def __init__(self, tsn: TimeSpaceNetwork):
        self.tsn = tsn
        self.free_out: dict[int, list[Arc]] = defaultdict(list)
        self.sinks_of: dict[str, dict[int, Arc]] = defaultdict(dict)  # maintenance -> tail -> arc
        for a in tsn.arcs:
            if a.kind in FREE_KINDS:
                self.free_out[a.tail].append(a)
            elif a.kind is ArcKind.SINK:
                self.sinks_of[a.option.entity].setdefault(a.tail, a)
        self._cache: dict[tuple, Optional[list[Arc]]] = {}

    def _walk(self, src: int, dst: Optional[int], targets: Optional[dict] = None):
        """Free-arc path from src to dst (or to any node in targets)."""
        key = (src, dst, None if targets is None else id(targets))
        if key in self._cache:
            return self._cache[key]
        if dst == src or (targets is not None and src in targets):
            self._cache[key] = ([], src)
            return self._cache[key]
        nodes = self.tsn.nodes
        limit = nodes[dst].time if dst is not None else None
        parent: dict[int, Arc] = {}
        stack, seen, found = [src], {src}, None
        while stack and found is None:
            u = stack.pop()
            for a in self.free_out.get(u, ()):
                w = a.head
                if w in seen or (limit is not None and nodes[w].time > limit):
                    continue
                seen.add(w)
                parent[w] = a
                if w == dst or (targets is not None and w in targets):
                    found = w
                    break
                stack.append(w)
        if found is None:
            self._cache[key] = None
            return None
        path, w = [], found
        while w != src:
            a = parent[w]
            path.append(a)
            w = a.tail
        self._cache[key] = (path[::-1], found)
        return self._cache[key]

    def route(self, network: str, required: list[Arc], failing: Optional[str] = None) -> Optional[list[Arc]]:
        """Arcs carrying flow one in ``network``, or None when no single path exists."""
        nodes = self.tsn.nodes
        cur = self.tsn.input_node[network]
        used: list[Arc] = []
        for a in sorted(required, key=lambda a: (nodes[a.tail].time, nodes[a.head].time, a.index)):
            step = self._walk(cur, a.tail)
            if step is None:
                return None
            used += step[0]
            used.append(a)
            cur = a.head
        if nodes[cur].balance is Balance.STRICT:
            return None
        if failing is not None:
            targets = self.sinks_of.get(failing, {})
            step = self._walk(cur, None, targets)
            if step is None:
                return None
            used += step[0]
            used.append(targets[step[1]])
        return used
