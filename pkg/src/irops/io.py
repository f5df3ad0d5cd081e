"""Instance and plan serialization.

Two instance formats are supported:

* ``.json``: one document holding the whole instance.
* delimited tables: a directory (or its ``manifest.csv``) with one CSV
  table per entity kind. The manifest holds the time anchors, cost
  coefficients and the instance name as ``key,value`` rows.

Plans are written as ordered lists of change orders, also as JSON or CSV.
"""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from .model import (
    Aircraft,
    Airport,
    CabinClass,
    CostCoefficients,
    CrewGroup,
    Disruption,
    DisruptionKind,
    DisruptedState,
    Flight,
    FlightPlan,
    Itinerary,
    ItineraryLeg,
    Maintenance,
    MaintenanceWindow,
    MaintPlan,
    PassengerAssignment,
    PaxGroup,
    ProblemInstance,
    RecoverySchedule,
    Slot,
    TimeAnchors,
    baseline_assignment,
    rotations,
    validate_instance,
)


class InstanceFormatError(ValueError):
    """Malformed record, dangling reference or duplicate id in an input file."""


PathLike = Union[str, Path]

TABLES = ("airports", "aircraft", "crew_groups", "flights", "maintenances", "maintenance_windows",
          "slots", "itineraries", "itinerary_legs", "disruptions")

_FLIGHT_COLS = ["id", "origin", "destination", "sched_departure", "duration", "original_aircraft",
                "original_crew", "multileg_group", "leg_index", "seats_economy", "seats_premium",
                "seats_business"]


def detect_format(path: PathLike) -> str:
    p = Path(path)
    if p.suffix.lower() == ".json":
        return "json"
    if p.is_dir() or p.suffix.lower() == ".csv":
        return "tables"
    raise InstanceFormatError(f"cannot infer instance format from {p}")


# --------------------------------------------------------------------------
# record parsing


class _Record:
    """Field access for one raw record that names the record in every error."""

    def __init__(self, raw: dict, kind: str, where: str = ""):
        self.raw = raw
        self.kind = kind
        self.where = where
        self.ident = str(raw.get("id", "?")) if isinstance(raw, dict) else "?"

    def _fail(self, fld, msg):
        loc = f" ({self.where})" if self.where else ""
        raise InstanceFormatError(f"{self.kind} {self.ident!r}{loc}: field {fld!r} {msg}")

    def _get(self, fld, required=True):
        v = self.raw.get(fld)
        if v is None or v == "":
            if required:
                self._fail(fld, "is missing")
            return None
        return v

    def str(self, fld, required=True) -> Optional[str]:
        v = self._get(fld, required)
        return None if v is None else str(v)

    def int(self, fld, required=True) -> Optional[int]:
        v = self._get(fld, required)
        if v is None:
            return None
        try:
            f = float(v)
        except (TypeError, ValueError):
            self._fail(fld, f"is not a number: {v!r}")
        if f != int(f):
            self._fail(fld, f"must be an integer: {v!r}")
        return int(f)

    def float(self, fld, required=True, default=None) -> Optional[float]:
        v = self._get(fld, required and default is None)
        if v is None:
            return default
        try:
            return float(v)
        except (TypeError, ValueError):
            self._fail(fld, f"is not a number: {v!r}")


def _build_instance(doc: dict, where: dict) -> ProblemInstance:
    def rec(kind, raw, i):
        w = where.get(kind)
        return _Record(raw, kind, w(i) if w else f"record {i}")

    anchors = _Record(doc.get("anchors") or {}, "anchors", where.get("anchors", lambda i: "")(0))
    anchors.ident = "anchors"
    time = TimeAnchors(anchors.int("current_time"), anchors.int("recovery_start"),
                       anchors.int("recovery_finish"), anchors.int("max_delay"))
    craw = doc.get("costs") or {}
    defaults = CostCoefficients()
    costs = CostCoefficients(**{f.name: float(craw[f.name]) if craw.get(f.name) not in (None, "")
                                else getattr(defaults, f.name) for f in fields(CostCoefficients)})

    airports = []
    for i, raw in enumerate(doc.get("airports", [])):
        r = rec("airport", raw, i)
        airports.append(Airport(r.str("id"), r.int("min_turnaround"), r.int("min_transit"),
                                r.int("min_crew_connection")))
    aircraft = []
    for i, raw in enumerate(doc.get("aircraft", [])):
        r = rec("aircraft", raw, i)
        aircraft.append(Aircraft(r.str("id"), r.str("initial_position"), r.int("available_from")))
    crews = []
    for i, raw in enumerate(doc.get("crew_groups", [])):
        r = rec("crew_group", raw, i)
        crews.append(CrewGroup(r.str("id"), r.str("initial_position"), r.int("available_from"),
                               r.int("flight_time_limit")))
    flights = []
    for i, raw in enumerate(doc.get("flights", [])):
        r = rec("flight", raw, i)
        seats = raw.get("seats")
        if isinstance(seats, dict):
            seat_t = tuple(int(seats.get(c.label, 0)) for c in CabinClass)
        else:
            seat_t = tuple(r.int(f"seats_{c.label}", required=False) or 0 for c in CabinClass)
        flights.append(Flight(
            r.str("id"), r.str("origin"), r.str("destination"), r.int("sched_departure"), r.int("duration"),
            r.str("original_aircraft"), r.str("original_crew"), r.str("multileg_group", required=False),
            r.int("leg_index", required=False) or 0, seat_t))
    maints = []
    for i, raw in enumerate(doc.get("maintenances", [])):
        r = rec("maintenance", raw, i)
        wins = []
        for j, wraw in enumerate(raw.get("windows", [])):
            wr = _Record(wraw, "maintenance window", f"{r.ident}[{j}]")
            wins.append(MaintenanceWindow(wr.str("airport"), wr.int("earliest_start"), wr.int("latest_start")))
        maints.append(Maintenance(r.str("id"), r.str("aircraft"), r.int("duration"), tuple(wins),
                                  r.float("fail_penalty"), r.str("planned_airport", required=False),
                                  r.int("planned_start", required=False)))
    slots = []
    for i, raw in enumerate(doc.get("slots", [])):
        r = rec("slot", raw, i)
        slots.append(Slot(r.str("id"), r.str("airport"), r.int("start"), r.int("end"), r.int("capacity"),
                          r.float("nonuse_penalty", required=False, default=0.0)))
    itins = []
    for i, raw in enumerate(doc.get("itineraries", [])):
        r = rec("itinerary", raw, i)
        legs = []
        for j, lraw in enumerate(raw.get("legs", [])):
            lr = _Record(lraw, "itinerary leg", f"{r.ident}[{j}]")
            try:
                cabin = CabinClass.parse(lraw.get("cabin", "economy"))
            except (KeyError, ValueError):
                lr._fail("cabin", f"unknown cabin class {lraw.get('cabin')!r}")
            legs.append(ItineraryLeg(lr.str("flight"), cabin))
        itins.append(Itinerary(
            r.str("id"), r.int("passenger_count"), tuple(legs),
            r.float("cancellation_cost", required=False, default=costs.pax_cancellation),
            r.float("downgrade_cost", required=False, default=costs.pax_downgrade),
            r.float("delay_cost", required=False, default=costs.pax_delay_per_minute)))
    disr = []
    for i, raw in enumerate(doc.get("disruptions", [])):
        r = rec("disruption", raw, i)
        r.ident = str(raw.get("target", "?"))
        try:
            kind = DisruptionKind(r.str("kind"))
        except ValueError:
            r._fail("kind", f"unknown disruption kind {raw.get('kind')!r}")
        disr.append(Disruption(kind, r.str("target"), r.int("minutes", required=False),
                               r.int("start", required=False), r.int("end", required=False),
                               r.int("capacity", required=False)))

    inst = ProblemInstance(time, tuple(airports), tuple(aircraft), tuple(crews), tuple(flights),
                           tuple(maints), tuple(slots), tuple(itins), tuple(disr), costs,
                           str(doc.get("name") or "instance"))
    structural = [d for d in validate_instance(inst)
                  if d.rule.startswith("unknown") or d.rule.startswith("duplicate")]
    if structural:
        raise InstanceFormatError("; ".join(str(d) for d in structural))
    return inst


# --------------------------------------------------------------------------
# JSON


def instance_to_dict(inst: ProblemInstance) -> dict:
    def clean(d):
        return {k: v for k, v in d.items() if v is not None}

    return {
        "name": inst.name,
        "anchors": asdict(inst.anchors),
        "costs": asdict(inst.costs),
        "airports": [asdict(a) for a in inst.airports],
        "aircraft": [asdict(a) for a in inst.aircraft],
        "crew_groups": [asdict(c) for c in inst.crew_groups],
        "flights": [clean({
            "id": f.id, "origin": f.origin, "destination": f.destination,
            "sched_departure": f.sched_departure, "duration": f.duration,
            "original_aircraft": f.original_aircraft, "original_crew": f.original_crew,
            "multileg_group": f.multileg_group, "leg_index": f.leg_index if f.multileg_group else None,
            "seats": {c.label: f.seats[c] for c in CabinClass}}) for f in inst.flights],
        "maintenances": [clean({
            "id": m.id, "aircraft": m.aircraft, "duration": m.duration, "fail_penalty": m.fail_penalty,
            "planned_airport": m.planned_airport, "planned_start": m.planned_start,
            "windows": [asdict(w) for w in m.allowed_windows]}) for m in inst.maintenances],
        "slots": [asdict(s) for s in inst.slots],
        "itineraries": [{
            "id": it.id, "passenger_count": it.passenger_count,
            "cancellation_cost": it.cancellation_cost, "downgrade_cost": it.downgrade_cost,
            "delay_cost": it.delay_cost,
            "legs": [{"flight": leg.flight, "cabin": leg.cabin.label} for leg in it.legs]}
            for it in inst.itineraries],
        "disruptions": [clean({"kind": DisruptionKind(d.kind).value, "target": d.target, "minutes": d.minutes,
                               "start": d.start, "end": d.end, "capacity": d.capacity})
                        for d in inst.disruptions],
    }


def dumps_instance(inst: ProblemInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1, sort_keys=False) + "\n"


def loads_instance(text: str) -> ProblemInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    return _build_instance(doc, {})


# --------------------------------------------------------------------------
# delimited tables


def _table_rows(inst: ProblemInstance) -> dict[str, tuple[list[str], list[list[Any]]]]:
    t: dict[str, tuple[list[str], list[list[Any]]]] = {}
    t["airports"] = (["id", "min_turnaround", "min_transit", "min_crew_connection"],
                     [[a.id, a.min_turnaround, a.min_transit, a.min_crew_connection] for a in inst.airports])
    t["aircraft"] = (["id", "initial_position", "available_from"],
                     [[a.id, a.initial_position, a.available_from] for a in inst.aircraft])
    t["crew_groups"] = (["id", "initial_position", "available_from", "flight_time_limit"],
                        [[c.id, c.initial_position, c.available_from, c.flight_time_limit]
                         for c in inst.crew_groups])
    t["flights"] = (_FLIGHT_COLS, [
        [f.id, f.origin, f.destination, f.sched_departure, f.duration, f.original_aircraft, f.original_crew,
         f.multileg_group or "", f.leg_index if f.multileg_group else "", *f.seats] for f in inst.flights])
    t["maintenances"] = (["id", "aircraft", "duration", "fail_penalty", "planned_airport", "planned_start"],
                         [[m.id, m.aircraft, m.duration, _num(m.fail_penalty), m.planned_airport or "",
                           "" if m.planned_start is None else m.planned_start] for m in inst.maintenances])
    t["maintenance_windows"] = (["maintenance", "airport", "earliest_start", "latest_start"],
                                [[m.id, w.airport, w.earliest_start, w.latest_start]
                                 for m in inst.maintenances for w in m.allowed_windows])
    t["slots"] = (["id", "airport", "start", "end", "capacity", "nonuse_penalty"],
                  [[s.id, s.airport, s.start, s.end, s.capacity, _num(s.nonuse_penalty)] for s in inst.slots])
    t["itineraries"] = (["id", "passenger_count", "cancellation_cost", "downgrade_cost", "delay_cost"],
                        [[i.id, i.passenger_count, _num(i.cancellation_cost), _num(i.downgrade_cost),
                          _num(i.delay_cost)] for i in inst.itineraries])
    t["itinerary_legs"] = (["itinerary", "flight", "cabin"],
                           [[i.id, leg.flight, leg.cabin.label] for i in inst.itineraries for leg in i.legs])
    t["disruptions"] = (["kind", "target", "minutes", "start", "end", "capacity"],
                        [[DisruptionKind(d.kind).value, d.target, *("" if v is None else v
                                                                    for v in (d.minutes, d.start, d.end, d.capacity))]
                         for d in inst.disruptions])
    return t


def _num(x: float):
    return int(x) if float(x).is_integer() else x


def _manifest_rows(inst: ProblemInstance) -> list[list[Any]]:
    rows = [["name", inst.name]]
    rows += [[k, v] for k, v in asdict(inst.anchors).items()]
    rows += [[k, _num(v)] for k, v in asdict(inst.costs).items()]
    return rows


def _write_csv(path: Path, header: list[str], rows: Iterable[list[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path) -> list[tuple[int, dict]]:
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [(reader.line_num, row) for row in reader]


def _read_tables(path: Path) -> ProblemInstance:
    root = path if path.is_dir() else path.parent
    manifest = root / "manifest.csv"
    if not manifest.exists():
        raise InstanceFormatError(f"missing manifest.csv in {root}")
    meta: dict[str, str] = {}
    with open(manifest, newline="") as fh:
        for i, row in enumerate(csv.reader(fh), 1):
            if i == 1 and row[:2] == ["key", "value"]:
                continue
            if len(row) < 2:
                raise InstanceFormatError(f"manifest.csv line {i}: expected key,value")
            meta[row[0]] = row[1]
    anchor_keys = [f.name for f in fields(TimeAnchors)]
    cost_keys = [f.name for f in fields(CostCoefficients)]
    doc: dict[str, Any] = {
        "name": meta.get("name", root.name),
        "anchors": {k: meta.get(k) for k in anchor_keys},
        "costs": {k: meta[k] for k in cost_keys if k in meta},
    }
    lines: dict[str, list[int]] = {}

    def load(name, key):
        rows = _read_csv(root / f"{name}.csv")
        lines[key] = [ln for ln, _ in rows]
        return [r for _, r in rows]

    doc["airports"] = load("airports", "airport")
    doc["aircraft"] = load("aircraft", "aircraft")
    doc["crew_groups"] = load("crew_groups", "crew_group")
    doc["flights"] = load("flights", "flight")
    doc["maintenances"] = load("maintenances", "maintenance")
    for m in doc["maintenances"]:
        m["windows"] = []
    by_id = {m.get("id"): m for m in doc["maintenances"]}
    for ln, w in _read_csv(root / "maintenance_windows.csv"):
        if w.get("maintenance") not in by_id:
            raise InstanceFormatError(f"maintenance_windows.csv line {ln}: unknown maintenance {w.get('maintenance')!r}")
        by_id[w["maintenance"]]["windows"].append(w)
    doc["slots"] = load("slots", "slot")
    doc["itineraries"] = load("itineraries", "itinerary")
    for it in doc["itineraries"]:
        it["legs"] = []
    by_it = {i.get("id"): i for i in doc["itineraries"]}
    for ln, leg in _read_csv(root / "itinerary_legs.csv"):
        if leg.get("itinerary") not in by_it:
            raise InstanceFormatError(f"itinerary_legs.csv line {ln}: unknown itinerary {leg.get('itinerary')!r}")
        by_it[leg["itinerary"]]["legs"].append(leg)
    doc["disruptions"] = load("disruptions", "disruption")
    files = {"airport": "airports", "aircraft": "aircraft", "crew_group": "crew_groups", "flight": "flights",
             "maintenance": "maintenances", "slot": "slots", "itinerary": "itineraries",
             "disruption": "disruptions"}
    where = {k: (lambda i, k=k: f"{files[k]}.csv line {lines[k][i]}") for k in files}
    where["anchors"] = lambda i: "manifest.csv"
    return _build_instance(doc, where)


def _write_tables(inst: ProblemInstance, path: Path) -> None:
    root = path if path.suffix.lower() != ".csv" else path.parent
    root.mkdir(parents=True, exist_ok=True)
    _write_csv(root / "manifest.csv", ["key", "value"], _manifest_rows(inst))
    for name, (header, rows) in _table_rows(inst).items():
        _write_csv(root / f"{name}.csv", header, rows)


# --------------------------------------------------------------------------
# public entry points


def read_instance(source: Union[PathLike, _io.TextIOBase], format: Optional[str] = None) -> ProblemInstance:
    """Read an instance from a path (format auto-detected) or a JSON text stream."""
    if hasattr(source, "read"):
        if format not in (None, "json"):
            raise InstanceFormatError("streams are only supported for JSON")
        return loads_instance(source.read())
    p = Path(source)
    fmt = format or detect_format(p)
    if fmt == "json":
        return loads_instance(p.read_text())
    if fmt == "tables":
        return _read_tables(p)
    raise InstanceFormatError(f"unknown format {fmt!r}")


def write_instance(inst: ProblemInstance, path: PathLike, format: Optional[str] = None) -> Path:
    p = Path(path)
    fmt = format or (detect_format(p) if p.suffix else "tables")
    if fmt == "json":
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(dumps_instance(inst))
    else:
        _write_tables(inst, p)
    return p


# --------------------------------------------------------------------------
# change orders

ORDER_KINDS = ("cancel", "delay", "aircraft-swap", "crew-swap", "maintenance-placement", "itinerary-rebooking")


@dataclass(frozen=True)
class ChangeOrder:
    kind: str
    target: str
    time: int
    details: dict = field(default_factory=dict, compare=True, hash=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target": self.target, "time": self.time, "details": self.details}


class PlanError(ValueError):
    pass


def _swap_chains(new, base, by_res, attr):
    """Maximal runs of consecutive flights moved onto one resource from one other resource."""
    chains = []
    for res, seq in sorted(by_res.items()):
        run: list[str] = []
        run_from = None
        for fid in seq + [None]:
            src = None
            if fid is not None and base.get(fid) is not None:
                src = getattr(base[fid], attr)
            moved = fid is not None and src is not None and src != res
            if moved and run and src == run_from:
                run.append(fid)
                continue
            if run:
                chains.append((res, run))
            run, run_from = ([fid], src) if moved else ([], None)
    return chains


def write_plan(state: DisruptedState, schedule: RecoverySchedule,
               pax: Optional[PassengerAssignment] = None) -> list[ChangeOrder]:
    """Diff a recovered plan against the disrupted baseline as ordered change orders."""
    inst = state.instance
    base = state.baseline.flights
    orders: list[ChangeOrder] = []
    if set(schedule.flights) != set(base):
        raise PlanError("schedule does not cover the instance's flights")
    for fid in sorted(schedule.flights):
        new, old = schedule.flights[fid], base[fid]
        if old is None:
            if new is not None:
                raise PlanError(f"flight {fid} was removed by a disruption")
            continue
        if new is None:
            orders.append(ChangeOrder("cancel", fid, old.departure))
        elif new.departure != old.departure:
            orders.append(ChangeOrder("delay", fid, old.departure, {"departure": new.departure}))
    by_ac, by_crew = rotations(schedule, inst)
    for attr, by_res, kind in (("aircraft", by_ac, "aircraft-swap"), ("crew", by_crew, "crew-swap")):
        for res, chain in _swap_chains(schedule.flights, base, by_res, attr):
            t = min(base[f].departure for f in chain)
            orders.append(ChangeOrder(kind, chain[0], t, {"flights": chain, attr: res}))
    for mid in sorted(schedule.maintenances):
        new, old = schedule.maintenances[mid], state.baseline.maintenances.get(mid)
        if new == old:
            continue
        t = min(x.start for x in (new, old) if x is not None)
        details = {"failed": True} if new is None else {"airport": new.airport, "start": new.start}
        orders.append(ChangeOrder("maintenance-placement", mid, t, details))
    if pax is not None:
        ref = baseline_assignment(inst)
        flight = inst.flight
        for it in inst.itineraries:
            groups = pax.groups.get(it.id, ())
            if groups == ref.groups[it.id]:
                continue
            for g in groups:
                for fid, _ in g.segments:
                    if schedule.flights.get(fid) is None:
                        raise PlanError(f"itinerary {it.id} rides canceled flight {fid}")
            t = flight[it.legs[0].flight].sched_departure
            orders.append(ChangeOrder("itinerary-rebooking", it.id, t, {"groups": [
                {"count": g.count, "delivered": g.delivered,
                 "segments": [[fid, CabinClass(c).label] for fid, c in g.segments]} for g in groups]}))
    rank = {k: i for i, k in enumerate(ORDER_KINDS)}
    orders.sort(key=lambda o: (o.time, rank[o.kind], o.target))
    return orders


def apply_orders(state: DisruptedState, orders: Iterable[ChangeOrder]) -> tuple[RecoverySchedule, PassengerAssignment]:
    """Replay change orders on the disrupted baseline."""
    inst = state.instance
    flights = dict(state.baseline.flights)
    maints = dict(state.baseline.maintenances)
    groups = dict(baseline_assignment(inst).groups)
    for o in orders:
        d = o.details
        if o.kind == "cancel":
            flights[o.target] = None
        elif o.kind == "delay":
            p = flights[o.target]
            flights[o.target] = FlightPlan(int(d["departure"]), p.aircraft, p.crew)
        elif o.kind in ("aircraft-swap", "crew-swap"):
            attr = "aircraft" if o.kind == "aircraft-swap" else "crew"
            for fid in d["flights"]:
                p = flights[fid]
                flights[fid] = FlightPlan(p.departure, d[attr] if attr == "aircraft" else p.aircraft,
                                          d[attr] if attr == "crew" else p.crew)
        elif o.kind == "maintenance-placement":
            maints[o.target] = None if d.get("failed") else MaintPlan(d["airport"], int(d["start"]))
        elif o.kind == "itinerary-rebooking":
            groups[o.target] = tuple(
                PaxGroup(int(g["count"]), tuple((s[0], CabinClass.parse(s[1])) for s in g["segments"]),
                         bool(g.get("delivered", True))) for g in d["groups"])
        else:
            raise PlanError(f"unknown change order kind {o.kind!r}")
    return RecoverySchedule(flights, maints), PassengerAssignment(groups)


def dumps_orders(orders: list[ChangeOrder], format: str = "json") -> str:
    if format == "json":
        return json.dumps([o.to_dict() for o in orders], indent=1, sort_keys=True) + "\n"
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "target", "time", "details"])
    for o in orders:
        w.writerow([o.kind, o.target, o.time, json.dumps(o.details, sort_keys=True)])
    return buf.getvalue()


def loads_orders(text: str, format: str = "json") -> list[ChangeOrder]:
    if format == "json":
        return [ChangeOrder(r["kind"], r["target"], int(r["time"]), r.get("details", {})) for r in json.loads(text)]
    rows = csv.DictReader(_io.StringIO(text))
    return [ChangeOrder(r["kind"], r["target"], int(r["time"]), json.loads(r["details"] or "{}")) for r in rows]
