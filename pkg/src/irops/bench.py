"""Full recovery pipeline plus the benchmark harness around it.

``run_pipeline`` is what ``irops solve`` executes: aircraft and crew
recovery first, then passenger reaccommodation with genetic refinement of
the schedule, then an independent verification of the result.  ``run_bench``
repeats it over generated instances and aggregates the timings into the
four report tables.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .acr import AcrConfig, run_acr
from .feasibility import check_feasibility
from .generator import generate_instance, tier_config
from .io import ChangeOrder, write_plan
from .model import DisruptedState, PassengerAssignment, ProblemInstance, RecoverySchedule, apply_disruptions
from .paxr import EvolutionResult, GaConfig, capacity_violations, evolve, passenger_cost

INSTANCE_COLUMNS = ("Airports", "Slotted Airp.", "Aircraft", "Crew Groups", "Flights", "Pass. Tickets",
                    "Multileg Conn.", "Flight Disrup.", "Maint.", "Airp. Slots")
ACR_COLUMNS = ("Prox. (s)", "S.S. Gen. (s)", "TSN Const. (ms)", "TSN Optim. (s)", "Entire Iteration (s)")
PAXR_COLUMNS = ("Sched. Improv. TTS (s)", "Evolution Generations")
SUMMARY_COLUMNS = ("Runs", "Full TTS (s)", "ACR Iters/Run", "Initial PaxR Cost", "Final PaxR Cost")

_COUNT_KEYS = ("airports", "slotted_airports", "aircraft", "crew_groups", "flights", "passengers", "multileg",
               "flight_disruptions", "maintenances", "slots")
# per-iteration log keys behind the ACR columns, in column order
_ACR_KEYS = ("proximity_s", "space_gen_s", "tsn_build_ms", "optimize_s", "iteration_s")

TIME_COLUMNS = frozenset(ACR_COLUMNS + ("Sched. Improv. TTS (s)", "Full TTS (s)"))


class VerificationError(RuntimeError):
    """The pipeline produced a plan that fails the independent checks."""

    def __init__(self, problems: list[str]):
        super().__init__(f"{len(problems)} problem(s): " + "; ".join(problems[:5]))
        self.problems = problems


@dataclass(frozen=True)
class BenchConfig:
    budget: Optional[float] = 600.0  # wall seconds for one run; None: count budgets only
    acr_share: float = 0.6
    backend: str = "auto"
    seed: int = 0  # GA seed
    workers: int = 1  # GA evaluation processes
    max_iterations: int = 10
    generations: Optional[int] = None
    option_budget: Optional[int] = None

    def acr(self) -> AcrConfig:
        tb = None if self.budget is None else self.budget * self.acr_share
        return AcrConfig(time_budget=tb, max_iterations=self.max_iterations, option_budget=self.option_budget,
                         backend=self.backend)

    def ga(self, acr_seconds: float) -> GaConfig:
        tb = None
        if self.budget is not None:
            tb = max(0.0, self.budget - acr_seconds)
        if tb is None and self.generations is None:
            raise ValueError("either a wall budget or a generation count is required")
        return GaConfig(generations=self.generations, time_budget=tb, seed=self.seed, workers=self.workers)


@dataclass
class PipelineResult:
    state: DisruptedState
    acr_schedule: RecoverySchedule
    evolution: EvolutionResult
    orders: list[ChangeOrder]
    row: "BenchRow"

    @property
    def schedule(self) -> RecoverySchedule:
        return self.evolution.schedule

    @property
    def assignment(self) -> PassengerAssignment:
        return self.evolution.assignment


@dataclass(frozen=True)
class BenchRow:
    """One run; ``values`` is keyed by the report column headers."""
    instance: str
    values: dict = field(compare=True, hash=False)

    def costs(self) -> dict:
        return {k: v for k, v in self.values.items() if k not in TIME_COLUMNS}


def verify_plan(state: DisruptedState, schedule: RecoverySchedule, pax: PassengerAssignment) -> list[str]:
    """Feasibility and seat capacity, both recomputed from scratch."""
    problems = [str(v) for v in check_feasibility(schedule, state)]
    problems += [f"capacity {v}" for v in capacity_violations(pax, schedule, state.instance)]
    return problems


def run_pipeline(instance: ProblemInstance, config: BenchConfig = BenchConfig()) -> PipelineResult:
    """Recover ``instance`` end to end; raises ``VerificationError`` rather than return a bad plan."""
    t0 = time.perf_counter()
    state = apply_disruptions(instance)
    acr = run_acr(state, config.acr())
    acr_s = time.perf_counter() - t0
    evo = evolve(state, acr, config.ga(acr_s))
    problems = verify_plan(state, evo.schedule, evo.assignment)
    recomputed = passenger_cost(evo.assignment, evo.schedule, instance)
    if not math.isclose(recomputed, evo.assignment.cost, rel_tol=1e-9, abs_tol=1e-6):
        problems.append(f"passenger cost {evo.assignment.cost} does not recompute ({recomputed})")
    if problems:
        raise VerificationError(problems)
    orders = write_plan(state, evo.schedule, evo.assignment)
    full = time.perf_counter() - t0

    log = acr.iteration_log
    counts = instance.counts()
    values: dict = {col: counts[key] for col, key in zip(INSTANCE_COLUMNS, _COUNT_KEYS)}
    for col, key in zip(ACR_COLUMNS, _ACR_KEYS):
        values[col] = statistics.fmean(r[key] for r in log) if log else 0.0
    values["Sched. Improv. TTS (s)"] = evo.seconds
    values["Evolution Generations"] = evo.generations
    values["Runs"] = 1
    values["Full TTS (s)"] = full
    values["ACR Iters/Run"] = len(log)
    values["Initial PaxR Cost"] = evo.initial_fitness
    values["Final PaxR Cost"] = evo.fitness
    return PipelineResult(state, acr, evo, orders, BenchRow(instance.name, values))


ROW_COLUMNS = ("Instance",) + INSTANCE_COLUMNS + ACR_COLUMNS + PAXR_COLUMNS + SUMMARY_COLUMNS


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def add(self, row: BenchRow) -> None:
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in self.rows:
            w.writerow([r.instance] + [_fmt(r.values[c]) for c in ROW_COLUMNS[1:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BenchReport":
        rep = cls()
        for rec in csv.DictReader(io.StringIO(text)):
            rep.add(BenchRow(rec.pop("Instance"), {k: float(v) for k, v in rec.items()}))
        return rep

    def averaged(self, group: str) -> dict:
        """Mean of every column over the runs whose instance name starts with ``group``; Runs is the count."""
        rows = [r for r in self.rows if _group_of(r.instance) == group]
        out = {c: statistics.fmean(r.values[c] for r in rows) for c in ROW_COLUMNS[1:]}
        out["Runs"] = len(rows)
        return out

    def groups(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            g = _group_of(r.instance)
            if g not in seen:
                seen.append(g)
        return seen

    def tables(self) -> str:
        """The four report tables as plain-text markdown, one line per instance group."""
        parts = []
        for title, cols in (("Instances", INSTANCE_COLUMNS), ("ACR averages (per iteration)", ACR_COLUMNS),
                            ("PaxR averages (per run)", PAXR_COLUMNS), ("Summary (per run)", SUMMARY_COLUMNS)):
            lines = [f"### {title}", "", "| Instance | " + " | ".join(cols) + " |",
                     "|---" * (len(cols) + 1) + "|"]
            for g in self.groups():
                avg = self.averaged(g)
                lines.append(f"| {g} | " + " | ".join(_fmt(avg[c], 2) for c in cols) + " |")
            parts.append("\n".join(lines))
        return "\n\n".join(parts) + "\n"


def _group_of(name: str) -> str:
    # generated names are "<tier>-<seed>"; anything else is its own group
    head, _, tail = name.rpartition("-")
    return head if head and tail.isdigit() else name


def _fmt(v, places: Optional[int] = None) -> str:
    if isinstance(v, int) or (isinstance(v, float) and v.is_integer() and places is None):
        return str(int(v))
    if places is not None:
        return f"{v:.{places}f}"
    return repr(float(v))


def parse_seeds(text: str) -> list[int]:
    """``"1..10"``, ``"3"`` or ``"1,4,7"`` (ranges may be mixed in)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (int(x) for x in part.split("..", 1))
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError("no seeds given")
    return out


def _bench_one(args) -> BenchRow:
    tier, seed, config = args
    inst = generate_instance(tier_config(tier, seed))
    return run_pipeline(inst, config).row


def run_bench(tier: str, seeds: Iterable[int], config: BenchConfig = BenchConfig(),
              parallel: int = 1) -> BenchReport:
    """One pipeline run per seed on generated ``tier`` instances.

    Runs are sequential by default so the timings stay clean; ``parallel``
    spreads instances over processes (GA evaluation then stays in-process).
    """
    jobs = [(tier, s, config) for s in seeds]
    report = BenchReport()
    if parallel > 1:
        jobs = [(t, s, replace(c, workers=1)) for t, s, c in jobs]
        with ProcessPoolExecutor(parallel) as pool:
            for row in pool.map(_bench_one, jobs):
                report.add(row)
    else:
        for job in jobs:
            report.add(_bench_one(job))
    return report
