"""SVG renderings of problems, networks and solutions.

Figures are built with matplotlib's object API (no global pyplot state)
and written with a fixed hash salt and no date stamp, so the same input
always yields the same bytes.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402

from .model import DisruptedState, ProblemInstance, RecoverySchedule, original_schedule  # noqa: E402
from .search import OptionKind  # noqa: E402
from .tsn import ArcKind, TimeSpaceNetwork  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "irops"
matplotlib.rcParams["svg.fonttype"] = "none"

KIND_COLORS = {
    ArcKind.GROUND: "#b0b0b0",
    ArcKind.INPUT: "#b0b0b0",
    ArcKind.EMBARK: "#6a8caf",
    ArcKind.DISEMBARK: "#6a8caf",
    ArcKind.MAINTENANCE: "#2e8b57",
    ArcKind.SINK: "#8b0000",
    ArcKind.CANCEL_VIRTUAL: "#dddddd",
}
OPTION_CYCLE = ("#1f77b4", "#ff7f0e", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
                "#bcbd22", "#2ca02c", "#7f7f7f")

# arcs that carry no option of their own share one legend entry
_OTHERS = frozenset({ArcKind.GROUND, ArcKind.INPUT, ArcKind.EMBARK, ArcKind.DISEMBARK})

Target = Union[str, Path, None]


def _save(fig: Figure, target: Target) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    text = buf.getvalue()
    if target is not None:
        Path(target).write_text(text)
    return text


def _hhmm(t: int) -> str:
    return f"{t // 60:02d}:{t % 60:02d}"


def _time_axis(ax, lo: int, hi: int) -> None:
    step = 60 if hi - lo <= 24 * 60 else 180
    first = (lo // step) * step
    ticks = list(range(first, hi + step, step))
    ax.set_xticks(ticks)
    ax.set_xticklabels([_hhmm(t) for t in ticks], fontsize=7, rotation=45)
    ax.set_xlim(lo - 10, hi + 10)
    ax.set_xlabel("time")


def _gantt(ax, rows: list[str], bars: list[tuple[str, int, int, str, dict]]) -> None:
    index = {r: i for i, r in enumerate(rows)}
    for row, start, length, label, style in bars:
        y = index[row]
        ax.broken_barh([(start, length)], (y - 0.35, 0.7), **style)
        ax.text(start + length / 2, y, label, ha="center", va="center", fontsize=6)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(rows, fontsize=7)
    ax.set_ylim(-1, max(1, len(rows)))
    ax.invert_yaxis()


def problem_figure(instance: Union[ProblemInstance, DisruptedState]) -> Figure:
    """Planned rotations per aircraft; disrupted flights are hatched."""
    state = instance if isinstance(instance, DisruptedState) else None
    inst = state.instance if state else instance
    sched = original_schedule(inst)
    disrupted = {d.target for d in inst.disruptions}
    rows = [a.id for a in inst.aircraft]
    bars = []
    for f in inst.flights:
        p = sched.flights[f.id]
        style = {"facecolor": "#9ecae1", "edgecolor": "black", "linewidth": 0.5}
        if f.id in disrupted:
            style.update(hatch="///", facecolor="#fdae6b")
        bars.append((p.aircraft, p.departure, f.duration, f"{f.id}\n{f.origin}-{f.destination}", style))
    fig = Figure(figsize=(10, 1 + 0.5 * max(1, len(rows))))
    ax = fig.add_subplot()
    _gantt(ax, rows, bars)
    times = [b[1] for b in bars] + [b[1] + b[2] for b in bars] or [0, 60]
    _time_axis(ax, min(times), max(times))
    ax.set_title(f"{inst.name}: planned rotations", fontsize=9)
    fig.tight_layout()
    return fig


def solution_figure(state: DisruptedState, schedule: RecoverySchedule) -> Figure:
    """Recovered rotations drawn over the original plan; canceled flights stay as dashed outlines."""
    inst = state.instance
    orig = state.original
    rows = [a.id for a in inst.aircraft]
    bars = []
    for f in inst.flights:
        o = orig.flights[f.id]
        p = schedule.flights.get(f.id)
        bars.append((o.aircraft, o.departure, f.duration, "",
                     {"facecolor": "none", "edgecolor": "#999999", "linewidth": 0.6,
                      "linestyle": "--" if p is None else "-"}))
        if p is None:
            bars.append((o.aircraft, o.departure, f.duration, f"{f.id} X",
                         {"facecolor": "none", "edgecolor": "#d62728", "linewidth": 0.8, "linestyle": "--"}))
            continue
        moved = p.departure != o.departure or p.aircraft != o.aircraft or p.crew != o.crew
        color = "#fdae6b" if moved else "#9ecae1"
        label = f.id if p.departure == o.departure else f"{f.id} +{p.departure - o.departure}"
        bars.append((p.aircraft, p.departure, f.duration, label,
                     {"facecolor": color, "edgecolor": "black", "linewidth": 0.5, "alpha": 0.9}))
    fig = Figure(figsize=(10, 1 + 0.5 * max(1, len(rows))))
    ax = fig.add_subplot()
    _gantt(ax, rows, bars)
    times = [b[1] for b in bars] + [b[1] + b[2] for b in bars] or [0, 60]
    _time_axis(ax, min(times), max(times))
    ax.legend(handles=[Patch(facecolor="#9ecae1", edgecolor="black", label="as planned"),
                       Patch(facecolor="#fdae6b", edgecolor="black", label="changed"),
                       Patch(facecolor="none", edgecolor="#999999", label="original"),
                       Patch(facecolor="none", edgecolor="#d62728", linestyle="--", label="canceled")],
              fontsize=7, loc="upper right")
    ax.set_title(f"{inst.name}: recovered schedule (cost {schedule.objective:g})", fontsize=9)
    fig.tight_layout()
    return fig


def _place_label(place: tuple) -> str:
    if place[0] == "aboard":
        return f"{place[1]}@{place[2]}"
    if place[0] == "sub":
        return f"{place[1]}#{place[2]}"
    return str(place[-1])


def _option_label(option, network: Optional[str]) -> str:
    """Flight plus the resource that varies inside ``network``: the crew on an aircraft, the aircraft on a crew."""
    if option.kind is not OptionKind.SCHEDULED:
        return option.entity
    if network is not None and network.startswith("aircraft:"):
        return f"{option.entity} {option.crew}"
    if network is not None and network.startswith("crew:"):
        return f"{option.entity} {option.aircraft}"
    return f"{option.entity} {option.aircraft} {option.crew}"


def tsn_figure(tsn: Optional[TimeSpaceNetwork], network: Optional[str] = None) -> Figure:
    """One subnetwork (or all of them): positions stacked vertically, arcs colored by kind.

    Flight and maintenance arcs get one legend entry per flight and partner
    resource; ground, input and embark/disembark arcs are grouped as "others".
    """
    fig = Figure(figsize=(11, 5))
    ax = fig.add_subplot()
    ax.set_xlabel("time")
    nodes = [] if tsn is None else \
        [n for n in tsn.nodes if n.place[0] != "void" and (network is None or n.network == network)]
    if not nodes:
        ax.set_title("empty network", fontsize=9)
        return fig
    keep = {n.index for n in nodes}
    positions = []
    for n in sorted(nodes, key=lambda n: n.index):
        if n.position not in positions:
            positions.append(n.position)
    row = {p: i for i, p in enumerate(positions)}
    void_y = len(positions)
    ys = {n.index: row[n.position] for n in nodes}
    ys[tsn.void] = void_y

    handles, seen = [], set()
    color_of: dict[str, str] = {}
    t_lo = min((n.time for n in nodes), default=0)
    t_hi = max((n.time for n in nodes), default=60)
    for a in tsn.arcs:
        if a.tail not in keep and a.head not in keep:
            continue
        tail, head = tsn.nodes[a.tail], tsn.nodes[a.head]
        x0 = tail.time if a.tail != tsn.void else head.time - 20
        x1 = head.time if a.head != tsn.void else tail.time + 20
        y0, y1 = ys.get(a.tail, void_y), ys.get(a.head, void_y)
        if a.kind in (ArcKind.FLIGHT, ArcKind.MAINTENANCE) and a.option is not None:
            label = _option_label(a.option, network)
            if label not in color_of:
                color_of[label] = OPTION_CYCLE[len(color_of) % len(OPTION_CYCLE)]
            color, lw = color_of[label], 1.2
        else:
            label = "others" if a.kind in _OTHERS else a.kind.value
            color, lw = KIND_COLORS[a.kind], 0.7
        ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                    arrowprops={"arrowstyle": "->", "color": color, "lw": lw, "shrinkA": 2, "shrinkB": 2})
        if label not in seen:
            seen.add(label)
            handles.append(Line2D([0], [0], color=color, lw=lw, label=label))
    ax.scatter([n.time for n in nodes], [ys[n.index] for n in nodes], s=8, color="black", zorder=3)
    labels = [f"{p[0].split(':', 1)[-1]} {_place_label(p[1])}" for p in positions] + ["Void"]
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels, fontsize=6)
    ax.set_ylim(-1, len(labels))
    ax.invert_yaxis()
    _time_axis(ax, t_lo, t_hi)
    # keep the legend readable on busy networks: at most 24 option entries, "others" always last
    others = [h for h in handles if h.get_label() == "others"]
    handles = [h for h in handles if h.get_label() != "others"][:24] + others
    ax.legend(handles=handles, fontsize=6, loc="center left", bbox_to_anchor=(1.0, 0.5))
    ax.set_title(f"time-space network{'' if network is None else ' ' + network}", fontsize=9)
    fig.tight_layout()
    return fig


def plot_problem(instance: Union[ProblemInstance, DisruptedState], target: Target = None) -> str:
    """SVG text of :func:`problem_figure`, also written to ``target`` when given."""
    return _save(problem_figure(instance), target)


def plot_solution(state: DisruptedState, schedule: RecoverySchedule, target: Target = None) -> str:
    return _save(solution_figure(state, schedule), target)


def plot_tsn(tsn: Optional[TimeSpaceNetwork], network: Optional[str] = None, target: Target = None) -> str:
    return _save(tsn_figure(tsn, network), target)
