"""Iterative aircraft and crew recovery.

Each iteration grows the option space around what the previous solution
left unresolved, rebuilds the time-space network, encodes and solves it
warm-started from the best schedule so far, and decodes the result.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .feasibility import check_feasibility, schedule_cost
from .milp import MilpModel, encode, warm_start_from
from .model import DisruptedState, MaintPlan, FlightPlan, RecoverySchedule
from .search import (OptionKind, SearchConfig, SolutionFeedback, build_initial_space, expand_space,
                     feedback_from)
from .solver import SolveOutcome, solve
from .tsn import TimeSpaceNetwork, build_tsn

__all__ = ["AcrConfig", "AcrError", "SolutionFeedback", "interpret_solution", "run_acr"]


class AcrError(RuntimeError):
    pass


@dataclass(frozen=True)
class AcrConfig:
    time_budget: Optional[float] = None  # seconds of wall time for the whole loop
    max_iterations: int = 10
    patience: int = 2  # iterations without improvement before stopping
    option_budget: Optional[int] = None  # change options added per build/expand step
    search: SearchConfig = field(default_factory=SearchConfig)
    backend: str = "auto"
    solve_time_limit: Optional[float] = None
    node_limit: int = 20000
    gap: float = 0.0


def interpret_solution(outcome: SolveOutcome, tsn: TimeSpaceNetwork,
                       threshold: Optional[int] = None) -> tuple[RecoverySchedule, SolutionFeedback]:
    """Decode one selected option per group into a schedule plus solver feedback."""
    if outcome.x is None or outcome.status not in ("optimal", "feasible-time-limit"):
        raise AcrError(f"no usable solution (status {outcome.status})")
    state = tsn.state
    value = dict(zip(outcome.names, np.asarray(outcome.x, dtype=float)))
    schedule = state.baseline.copy()
    for ent, opts in tsn.space.groups.items():
        picked = []
        for o in opts:
            v = sum(value.get(n, 0.0) for n in tsn.decision[o.key])
            if v > 0.5:
                picked.append(o)
            elif v > 1e-6:
                raise AcrError(f"{ent}: fractional selection {v:g} of {o}")
        if len(picked) != 1:
            raise AcrError(f"{ent}: {len(picked)} options selected")
        o = picked[0]
        if o.kind is OptionKind.SCHEDULED:
            schedule.flights[ent] = FlightPlan(o.departure, o.aircraft, o.crew)
        elif o.kind is OptionKind.CANCELED:
            schedule.flights[ent] = None
        elif o.kind is OptionKind.SUCCEEDING:
            schedule.maintenances[ent] = MaintPlan(o.airport, o.start)
        else:
            schedule.maintenances[ent] = None
    schedule.objective = float(outcome.objective)
    schedule.iteration_log = []
    if threshold is None:
        threshold = SearchConfig().delay_threshold
    return schedule, feedback_from(schedule, state, threshold)


def run_acr(state: DisruptedState, config: AcrConfig = AcrConfig(),
            on_iteration: Optional[Callable[[dict, RecoverySchedule], None]] = None) -> RecoverySchedule:
    """Best schedule found within the configured budgets.

    ``on_iteration`` receives each log row with the schedule that iteration
    produced, already checked for feasibility.
    """
    t_start = time.perf_counter()
    best: Optional[RecoverySchedule] = None
    best_obj = math.inf
    feedback = SolutionFeedback()
    space = None
    stale = 0
    log: list[dict] = []
    stop = "max-iterations"
    for it in range(1, config.max_iterations + 1):
        t_it = time.perf_counter()
        if space is None:
            space = build_initial_space(state, config.option_budget, config.search)
        else:
            grown = expand_space(space, feedback, config.option_budget, config.search, best)
            if grown.size() == space.size():
                stop = "space-exhausted"
                break
            space = grown
        t_tsn = time.perf_counter()
        tsn = build_tsn(space, state)
        model: MilpModel = encode(tsn, name=f"{state.instance.name}-it{it}")
        tsn_ms = (time.perf_counter() - t_tsn) * 1000.0
        warm = warm_start_from(best if best is not None else state.baseline, model)
        limit = config.solve_time_limit
        if config.time_budget is not None:
            left = config.time_budget - (time.perf_counter() - t_start)
            limit = max(1.0, left) if limit is None else max(1.0, min(limit, left))
        t_opt = time.perf_counter()
        outcome = solve(model, config.backend, time_limit=limit, node_limit=config.node_limit, gap=config.gap)
        opt_s = time.perf_counter() - t_opt
        schedule, feedback = interpret_solution(outcome, tsn, config.search.delay_threshold)
        problems = check_feasibility(schedule, state)
        if problems:
            raise AcrError(f"iteration {it} produced an infeasible schedule: {problems[:3]}")
        cost = schedule_cost(schedule, state)
        if abs(cost - outcome.objective) > 1e-6 * max(1.0, abs(cost)):
            raise AcrError(f"model objective {outcome.objective} disagrees with schedule cost {cost}")
        improved = cost < best_obj - 1e-9
        if improved:
            best, best_obj, stale = schedule, cost, 0
        else:
            stale += 1
        row = {
            "iteration": it,
            "options": space.size(),
            "change_options": space.change_count(),
            "nodes": len(tsn.nodes),
            "arcs": len(tsn.arcs),
            "variables": model.n_vars,
            "constraints": model.n_rows,
            "objective": cost,
            "best_objective": best_obj,
            "bound": outcome.bound,
            "status": outcome.status,
            "backend": outcome.backend,
            "bb_nodes": outcome.nodes,
            "warm_start_complete": warm.complete,
            "proximity_s": space.stats.get("proximity", 0.0),
            "space_gen_s": space.stats.get("generation", 0.0),
            "tsn_build_ms": tsn_ms,
            "optimize_s": opt_s,
            "iteration_s": time.perf_counter() - t_it,
        }
        log.append(row)
        if on_iteration is not None:
            on_iteration(row, schedule)
        if best_obj <= 1e-9:
            stop = "zero-cost"
            break
        if stale >= config.patience:
            stop = "no-improvement"
            break
        if config.time_budget is not None and time.perf_counter() - t_start >= config.time_budget:
            stop = "time-budget"
            break
    result = best.copy()
    result.objective = best_obj
    if log:
        log[-1]["stop"] = stop
    result.iteration_log = log
    return result
