"""Binary program over a time-space network, plus LP-text interchange."""

from __future__ import annotations

import io
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np
import scipy.sparse as sp

from .model import RecoverySchedule
from .search import OptionChoice, OptionKind, cost_of
from .tsn import ArcKind, Balance, Router, TimeSpaceNetwork, sanitize


class EncodingError(ValueError):
    pass


@dataclass
class Row:
    name: str
    tag: str  # flow | uniq | slot | duty
    idx: list[int]
    coef: list[float]
    sense: str  # "<=" or "="
    rhs: float


@dataclass
class WarmStart:
    values: dict[int, float]
    complete: bool
    missing: list[str] = field(default_factory=list)
    objective: Optional[float] = None


@dataclass
class MilpModel:
    names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    obj: np.ndarray
    rows: list[Row]
    # entity -> [(option, indices of the variables summing to its decision)]
    groups: dict[str, list[tuple[OptionChoice, list[int]]]] = field(default_factory=dict)
    nonuse: dict[str, int] = field(default_factory=dict)
    network: Optional[TimeSpaceNetwork] = None
    warm: Optional[WarmStart] = None
    name: str = "recovery"

    def __post_init__(self):
        self.index = {n: i for i, n in enumerate(self.names)}

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def counts(self) -> dict[str, int]:
        c: dict[str, int] = defaultdict(int)
        for r in self.rows:
            c[r.tag] += 1
        return {"variables": self.n_vars, "constraints": self.n_rows, **dict(sorted(c.items()))}

    def matrix(self) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        """Sparse constraint matrix, right-hand sides and an is-equality mask."""
        ri = [i for i, r in enumerate(self.rows) for _ in r.idx]
        ci = [j for r in self.rows for j in r.idx]
        vals = [a for r in self.rows for a in r.coef]
        A = sp.csr_matrix((vals, (ri, ci)), shape=(self.n_rows, self.n_vars))
        b = np.array([r.rhs for r in self.rows], dtype=float)
        eq = np.array([r.sense == "=" for r in self.rows], dtype=bool)
        return A, b, eq

    def objective_value(self, x) -> float:
        return float(np.dot(self.obj, x))

    def violations(self, x, tol: float = 1e-6) -> list[str]:
        x = np.asarray(x, dtype=float)
        out = []
        for j in np.nonzero((x < self.lb - tol) | (x > self.ub + tol))[0]:
            out.append(f"bound {self.names[j]}={x[j]:g}")
        for j in np.nonzero(self.integer & (np.abs(x - np.round(x)) > tol))[0]:
            out.append(f"integrality {self.names[j]}={x[j]:g}")
        for r in self.rows:
            lhs = float(np.dot(r.coef, x[r.idx])) if r.idx else 0.0
            if (r.sense == "=" and abs(lhs - r.rhs) > tol) or (r.sense == "<=" and lhs > r.rhs + tol):
                out.append(f"row {r.name}: {lhs:g} {r.sense} {r.rhs:g}")
        return out

    def chosen(self, x) -> dict[str, OptionChoice]:
        """Option picked in every group by a (near) integral solution."""
        out = {}
        for ent, members in self.groups.items():
            best, val = None, -1.0
            for opt, idx in members:
                v = float(sum(x[j] for j in idx))
                if v > val:
                    best, val = opt, v
            out[ent] = best
        return out


def encode(tsn: TimeSpaceNetwork, name: str = "recovery") -> MilpModel:
    """Flow, unique-decision, slot and duty rows over the network's variables."""
    state = tsn.state
    inst = state.instance
    names = tsn.variables()
    nonuse_names = [f"n_{sanitize(sc.slot.id)}" for sc in tsn.slot_choices]
    names = names + nonuse_names
    index = {n: i for i, n in enumerate(names)}
    nv = len(names)
    lb, ub = np.zeros(nv), np.ones(nv)
    integer = np.ones(nv, dtype=bool)
    obj = np.zeros(nv)
    rows: list[Row] = []

    def row(nm, tag, terms: dict[int, float], sense, rhs):
        items = sorted((j, a) for j, a in terms.items() if a != 0)
        rows.append(Row(nm, tag, [j for j, _ in items], [float(a) for _, a in items], sense, float(rhs)))

    # flow balance per node; input arcs are constants on the right
    out_terms: dict[int, dict[int, float]] = defaultdict(lambda: defaultdict(float))
    supply: dict[int, int] = defaultdict(int)
    for a in tsn.arcs:
        if a.kind is ArcKind.INPUT:
            supply[a.head] += 1
            continue
        if a.kind is ArcKind.CANCEL_VIRTUAL:
            continue
        j = index[a.var]
        out_terms[a.tail][j] += 1.0
        out_terms[a.head][j] -= 1.0
    for n in tsn.nodes:
        if n.balance is Balance.FREE:
            continue
        terms = out_terms.get(n.index, {})
        if not any(terms.values()):
            continue
        sense = "=" if n.balance is Balance.STRICT else "<="
        row(f"flow_{n.index}", "flow", terms, sense, supply[n.index])

    groups: dict[str, list[tuple[OptionChoice, list[int]]]] = {}
    for ent, opts in tsn.space.groups.items():
        members, terms = [], defaultdict(float)
        for o in opts:
            idx = [index[v] for v in tsn.decision[o.key]]
            if not idx:
                raise EncodingError(f"option {o.kind.value} of {ent} has no decision variable")
            members.append((o, idx))
            c = cost_of(o, state)
            for j in idx:
                terms[j] += 1.0
                obj[j] += c
        groups[ent] = members
        row(f"uniq_{sanitize(ent)}", "uniq", terms, "=", 1)

    nonuse = {}
    for sc, nm in zip(tsn.slot_choices, nonuse_names):
        j = index[nm]
        nonuse[sc.slot.id] = j
        ub[j] = sc.room
        integer[j] = False
        obj[j] = cost_of(sc, state)
        terms = defaultdict(float)
        for o in sc.members:
            terms[index[tsn.decision[o.key][0]]] += 1.0
        terms[j] += 1.0
        row(f"slot_{sanitize(sc.slot.id)}", "slot", terms, "=", sc.room)

    flown_by: dict[str, dict[int, float]] = {cg.id: defaultdict(float) for cg in inst.crew_groups}
    for ent, members in groups.items():
        for o, idx in members:
            if o.kind is OptionKind.SCHEDULED:
                flown_by[o.crew][idx[0]] += inst.flight[o.entity].duration
    for cg in inst.crew_groups:
        room = max(0, cg.flight_time_limit - state.crew_flown.get(cg.id, 0))
        row(f"duty_{sanitize(cg.id)}", "duty", flown_by[cg.id], "<=", room)

    return MilpModel(names, lb, ub, integer, obj, rows, groups, nonuse, tsn, name=name)


def _net(kind: str, ident: str) -> str:
    return f"{kind}:{ident}"


def route_assignment(model: MilpModel, chosen: dict[str, OptionChoice], router: Optional[Router] = None
                     ) -> tuple[Optional[np.ndarray], list[str]]:
    """Full variable vector realizing one option per group, or the reasons it cannot."""
    tsn = model.network
    state = tsn.state
    inst = state.instance
    router = router or Router(tsn)
    x = np.zeros(model.n_vars)
    problems: list[str] = []
    required: dict[str, list] = defaultdict(list)
    failing: dict[str, list[str]] = defaultdict(list)
    arcs_of_var: dict[str, list] = defaultdict(list)
    for a in tsn.arcs:
        if a.var is not None and a.kind in (ArcKind.FLIGHT, ArcKind.MAINTENANCE):
            arcs_of_var[a.var].append(a)

    for ent, members in model.groups.items():
        opt = chosen[ent]
        if opt.kind is OptionKind.FAILING:
            failing[_net("aircraft", inst.maintenance[ent].aircraft)].append(ent)
            continue
        (j,) = [idx for o, idx in members if o.key == opt.key][0]
        x[j] = 1.0
        for a in arcs_of_var.get(model.names[j], ()):
            required[tsn.nodes[a.tail].network].append(a)

    for net in tsn.input_node:
        fails = failing.get(net, [])
        if len(fails) > 1:
            problems.append(f"{net}: more than one failed maintenance")
            continue
        path = router.route(net, required.get(net, []), fails[0] if fails else None)
        if path is None:
            problems.append(f"{net}: no path through the chosen arcs")
            continue
        for a in path:
            if a.var is not None:
                x[model.index[a.var]] = 1.0

    for sc in tsn.slot_choices:
        used = sum(1 for o in sc.members if chosen.get(o.entity) is not None and chosen[o.entity].key == o.key)
        if used > sc.room:
            problems.append(f"slot {sc.slot.id}: {used} departures, room {sc.room}")
        x[model.nonuse[sc.slot.id]] = max(0, sc.room - used)

    if not problems:
        problems = model.violations(x)
    return (None if problems else x), problems


def warm_start_from(schedule: RecoverySchedule, model: MilpModel) -> WarmStart:
    """Translate a schedule into variable values; complete only if every group maps."""
    state = model.network.state
    chosen: dict[str, OptionChoice] = {}
    values: dict[int, float] = {}
    missing: list[str] = []
    for ent, members in model.groups.items():
        if ent in state.instance.flight:
            plan = schedule.flights.get(ent)
            if plan is None:
                match = [m for m in members if m[0].kind is OptionKind.CANCELED]
            else:
                match = [m for m in members if m[0].kind is OptionKind.SCHEDULED and
                         (m[0].departure, m[0].aircraft, m[0].crew) == (plan.departure, plan.aircraft, plan.crew)]
        else:
            mp = schedule.maintenances.get(ent)
            if mp is None:
                match = [m for m in members if m[0].kind is OptionKind.FAILING]
            else:
                match = [m for m in members if m[0].kind is OptionKind.SUCCEEDING and
                         (m[0].airport, m[0].start) == (mp.airport, mp.start)]
        if not match:
            missing.append(ent)
            continue
        opt, idx = match[0]
        chosen[ent] = opt
        if len(idx) == 1:
            values[idx[0]] = 1.0
    if missing:
        ws = WarmStart(values, False, missing)
    else:
        x, problems = route_assignment(model, chosen)
        if x is None:
            ws = WarmStart(values, False, problems)
        else:
            ws = WarmStart({j: float(v) for j, v in enumerate(x) if v}, True, [], model.objective_value(x))
    model.warm = ws
    return ws


def fallback_assignment(model: MilpModel) -> Optional[np.ndarray]:
    """Cancel every flight and fail every maintenance; feasible whenever routing allows."""
    chosen = {}
    for ent, members in model.groups.items():
        pick = [o for o, _ in members if o.kind in (OptionKind.CANCELED, OptionKind.FAILING)]
        if not pick:
            return None
        chosen[ent] = pick[0]
    x, _ = route_assignment(model, chosen)
    return x


# --------------------------------------------------------------------------
# LP text


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _terms(idx, coef, names) -> list[str]:
    out = []
    for j, a in zip(idx, coef):
        sign = "-" if a < 0 else "+"
        out.append(f"{sign} {_fmt(abs(a))} {names[j]}")
    return out


def _wrap(head: str, parts: list[str], width: int = 8) -> list[str]:
    lines = []
    for k in range(0, max(len(parts), 1), width):
        chunk = " ".join(parts[k:k + width])
        lines.append((f" {head} " if k == 0 else "   ") + chunk)
    return lines


def export_model(model: MilpModel, out: Optional[TextIO] = None) -> str:
    """Write the model as CPLEX LP text; returns the text."""
    names = model.names
    lines = [f"\\ {model.name}: {model.n_vars} variables, {model.n_rows} constraints", "Minimize"]
    # every column appears in the objective (zeros included) to pin the column order
    parts = _terms(range(model.n_vars), model.obj, names)
    lines += _wrap("obj:", parts)
    lines.append("Subject To")
    for r in model.rows:
        parts = _terms(r.idx, r.coef, names) or [f"+ 0 {names[0]}"]
        body = _wrap(f"{r.name}:", parts)
        body[-1] += f" {r.sense} {_fmt(r.rhs)}"
        lines += body
    lines.append("Bounds")
    for j in range(model.n_vars):
        if not model.integer[j]:
            lines.append(f" {_fmt(model.lb[j])} <= {names[j]} <= {_fmt(model.ub[j])}")
    lines.append("Binaries")
    bins = [names[j] for j in range(model.n_vars) if model.integer[j]]
    for k in range(0, len(bins), 8):
        lines.append(" " + " ".join(bins[k:k + 8]))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if out is not None:
        out.write(text)
    return text


@dataclass
class LpProblem:
    """Arrays parsed back from LP text (minimization, <= and = rows)."""

    names: list[str]
    obj: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    senses: list[str]
    row_names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray


_SECTIONS = {"minimize": "obj", "minimum": "obj", "min": "obj", "subject to": "rows", "st": "rows",
             "s.t.": "rows", "such that": "rows", "bounds": "bounds", "binaries": "bin", "binary": "bin",
             "bin": "bin", "generals": "gen", "general": "gen", "end": "end"}
_SENSE = re.compile(r"(<=|>=|=<|=>|=)")


def _parse_expr(tokens: list[str]) -> list[tuple[str, float]]:
    out, sign, coef = [], 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        out.append((tok, sign * (1.0 if coef is None else coef)))
        sign, coef = 1.0, None
    return out


def read_lp(src) -> LpProblem:
    """Parse LP text produced by :func:`export_model` (and simple hand-written files)."""
    text = src.read() if hasattr(src, "read") else str(src)
    blocks: dict[str, list[str]] = defaultdict(list)
    section = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            continue
        if section is None:
            raise ValueError(f"LP text outside any section: {raw!r}")
        blocks[section].append(line)

    order: list[str] = []
    seen: set[str] = set()

    def note(v):
        if v not in seen:
            seen.add(v)
            order.append(v)

    obj_body = " ".join(blocks["obj"])
    if ":" in obj_body:
        obj_body = obj_body.split(":", 1)[1]
    obj_terms = _parse_expr(obj_body.split())
    for v, _ in obj_terms:
        note(v)

    rows = []
    stmt = " ".join(blocks["rows"])
    for m in re.finditer(r"(\S+?):\s*(.*?)\s*(<=|>=|=<|=>|=)\s*(\S+)", stmt):
        name, body, sense, rhs = m.groups()
        terms = _parse_expr(body.split())
        for v, _ in terms:
            note(v)
        sense = {"=<": "<=", "=>": ">="}.get(sense, sense)
        rows.append((name, terms, sense, float(rhs)))

    bounds = {}
    for line in blocks["bounds"]:
        parts = _SENSE.split(line.replace(" ", ""))
        if len(parts) == 5:
            lo, _, var, _, hi = parts
            bounds[var] = (float(lo), float(hi))
        elif len(parts) == 3:
            var, sense, val = parts
            lo, hi = bounds.get(var, (0.0, np.inf))
            if sense in ("<=", "=<"):
                hi = float(val)
            elif sense in (">=", "=>"):
                lo = float(val)
            else:
                lo = hi = float(val)
            bounds[var] = (lo, hi)
        note(parts[2] if len(parts) == 5 else parts[0])
    binaries = [v for line in blocks["bin"] for v in line.split()]
    generals = [v for line in blocks["gen"] for v in line.split()]
    for v in binaries + generals:
        note(v)

    index = {v: i for i, v in enumerate(order)}
    n = len(order)
    obj = np.zeros(n)
    for v, a in obj_terms:
        obj[index[v]] += a
    ri, ci, vals = [], [], []
    b = np.zeros(len(rows))
    senses = []
    for i, (_, terms, sense, rhs) in enumerate(rows):
        for v, a in terms:
            ri.append(i)
            ci.append(index[v])
            vals.append(a)
        b[i] = rhs
        senses.append(sense)
    # duplicate entries are summed by the constructor
    A = sp.csr_matrix((vals, (ri, ci)), shape=(len(rows), n))
    A.eliminate_zeros()
    lb, ub = np.zeros(n), np.full(n, np.inf)
    integer = np.zeros(n, dtype=bool)
    for v, (lo, hi) in bounds.items():
        lb[index[v]], ub[index[v]] = lo, hi
    for v in binaries:
        integer[index[v]] = True
        lb[index[v]], ub[index[v]] = max(lb[index[v]], 0.0), min(ub[index[v]], 1.0)
    for v in generals:
        integer[index[v]] = True
    return LpProblem(order, obj, A, b, senses, [r[0] for r in rows], lb, ub, integer)


def model_from_lp(lp: LpProblem) -> MilpModel:
    """A bare model (no groups or network) with the parsed arrays; >= rows are negated."""
    rows = []
    for i in range(len(lp.senses)):
        lo, hi = lp.A.indptr[i], lp.A.indptr[i + 1]
        nz, coef = lp.A.indices[lo:hi], lp.A.data[lo:hi]
        rhs, sense = lp.b[i], lp.senses[i]
        if sense == ">=":
            coef, rhs, sense = -coef, -rhs, "<="
        rows.append(Row(lp.row_names[i], lp.row_names[i].split("_", 1)[0], nz.tolist(),
                        coef.tolist(), sense, float(rhs)))
    return MilpModel(list(lp.names), lp.lb.copy(), lp.ub.copy(), lp.integer.copy(), lp.obj.copy(), rows)


def export_text(model: MilpModel) -> str:
    buf = io.StringIO()
    export_model(model, buf)
    return buf.getvalue()
