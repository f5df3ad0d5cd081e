"""Exact solution of recovery models.

The built-in backend is a revised bounded-variable simplex (sparse LU)
inside best-first branch and bound. A second backend hands the exported
LP text to HiGHS through scipy. ``enumerate_oracle`` solves small models
by brute force over option groups and is used to cross-check both.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .milp import MilpModel, export_text, fallback_assignment, read_lp, route_assignment
from .search import OptionKind
from .tsn import Router

PRIMAL_TOL = 1e-7
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
INT_TOL = 1e-6


class SolverError(RuntimeError):
    pass


@dataclass
class SolveOutcome:
    status: str  # optimal | feasible-time-limit | infeasible | error
    x: Optional[np.ndarray]
    objective: Optional[float]
    bound: float
    backend: str
    nodes: int = 0
    lp_iterations: int = 0
    seconds: float = 0.0
    used_warm_start: bool = False
    notes: list[str] = field(default_factory=list)
    names: list[str] = field(default_factory=list)  # variable order of ``x``
    # (incumbent objective, global lower bound) whenever either moves; builtin backend only
    history: list[tuple[float, float]] = field(default_factory=list)

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    @property
    def gap(self) -> float:
        if self.objective is None:
            return math.inf
        return (self.objective - self.bound) / max(1.0, abs(self.objective))


# --------------------------------------------------------------------------
# bounded simplex


class _Infeasible(Exception):
    pass


class _Unbounded(Exception):
    pass


class Tableau:
    """Revised bounded-variable simplex for min c'x, Ax (<=|=) b, lb <= x <= ub.

    Columns are the structural variables, one slack per <= row, then one
    artificial per row that needed it; artificials are fixed at zero once a
    feasible basis is known. The basis inverse is a sparse LU factor followed
    by a file of eta columns, rebuilt every ``refactor_every`` pivots.
    """

    refactor_every = 40

    def __init__(self, A, b, eq, c, lb, ub):
        m, n = A.shape
        self.m, self.n_struct = m, n
        ineq = np.nonzero(~eq)[0]
        S = sp.csc_matrix((np.ones(len(ineq)), (ineq, np.arange(len(ineq)))), shape=(m, len(ineq)))
        self.A = sp.hstack([sp.csc_matrix(A), S], format="csc")
        self.b = np.asarray(b, dtype=float)
        self.c = np.concatenate([c, np.zeros(len(ineq))])
        self.lb = np.concatenate([lb, np.zeros(len(ineq))])
        self.ub = np.concatenate([ub, np.full(len(ineq), np.inf)])
        self.slack_of_row = {int(i): n + k for k, i in enumerate(ineq)}
        self.iterations = 0
        self.n_art = 0

    # -- initial basis
    def crash(self) -> int:
        """Diagonal starting basis; returns the number of artificials added."""
        m = self.m
        A = self.A
        x = self.lb.copy()
        x[~np.isfinite(x)] = 0.0
        resid = self.b - A @ x
        basis = [-1] * m
        counts = np.diff(A.indptr)
        used = set()
        # columns with a single nonzero, by row
        single: dict[int, list[int]] = {}
        for j in np.nonzero(counts[: self.n_struct] == 1)[0]:
            single.setdefault(int(A.indices[A.indptr[j]]), []).append(int(j))
        for i in range(m):
            j = self.slack_of_row.get(i)
            if j is not None and resid[i] >= -PRIMAL_TOL:
                basis[i] = j
                continue
            for j in single.get(i, ()):
                if j in used:
                    continue
                a = A[i, j]
                v = x[j] + resid[i] / a
                if self.lb[j] - PRIMAL_TOL <= v <= self.ub[j] + PRIMAL_TOL:
                    basis[i] = j
                    used.add(j)
                    break
        art = [i for i in range(m) if basis[i] < 0]
        if art:
            signs = np.where(resid[art] >= 0, 1.0, -1.0)
            cols = sp.csc_matrix((signs, (art, np.arange(len(art)))), shape=(m, len(art)))
            base = A.shape[1]
            self.A = sp.hstack([A, cols], format="csc")
            self.c = np.concatenate([self.c, np.zeros(len(art))])
            self.lb = np.concatenate([self.lb, np.zeros(len(art))])
            self.ub = np.concatenate([self.ub, np.full(len(art), np.inf)])
            for k, i in enumerate(art):
                basis[i] = base + k
        self.n_art = len(art)
        self.basis = np.array(basis, dtype=int)
        self.upper = np.zeros(self.A.shape[1], dtype=bool)
        self.refactor()
        return len(art)

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def refactor(self) -> None:
        B = self.A[:, self.basis].tocsc()
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError("singular basis") from exc
        self.etas: list[tuple[int, np.ndarray]] = []
        nb = np.ones(self.n_cols, dtype=bool)
        nb[self.basis] = False
        xn = np.where(self.upper, self.ub, self.lb)
        xn[~np.isfinite(xn)] = 0.0
        x = np.where(nb, xn, 0.0)
        x[self.basis] = self.ftran(self.b - self.A @ x)
        self.x = x

    def ftran(self, v) -> np.ndarray:
        w = self.lu.solve(np.asarray(v, dtype=float))
        for r, eta in self.etas:
            wr = w[r]
            if wr != 0.0:
                w += eta * wr
                w[r] = eta[r] * wr
        return w

    def btran(self, v) -> np.ndarray:
        y = np.array(v, dtype=float)
        for r, eta in reversed(self.etas):
            y[r] = float(eta @ y)
        return self.lu.solve(y, trans="T")

    def copy(self) -> "Tableau":
        t = object.__new__(Tableau)
        t.__dict__.update(self.__dict__)
        for k in ("x", "basis", "upper", "lb", "ub"):
            setattr(t, k, getattr(self, k).copy())
        t.etas = list(self.etas)
        return t

    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
        col[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        return col

    def _pivot(self, r: int, j: int, alpha: np.ndarray) -> None:
        eta = -alpha / alpha[r]
        eta[r] = 1.0 / alpha[r]
        self.etas.append((r, eta))
        self.basis[r] = j
        self.iterations += 1
        if len(self.etas) >= self.refactor_every:
            self.refactor()

    def _reduced(self, cost) -> np.ndarray:
        y = self.btran(cost[self.basis])
        d = cost - self.A.T @ y
        d[self.basis] = 0.0
        return d

    def primal(self, cost, max_iter: int = 200000) -> None:
        n = self.n_cols
        movable = self.ub - self.lb > PRIMAL_TOL
        degenerate = 0
        bland = False
        for _ in range(max_iter):
            d = self._reduced(cost)
            nb = np.ones(n, dtype=bool)
            nb[self.basis] = False
            up = self.upper
            gain = np.where(nb & movable & ~up & (d < -DUAL_TOL), -d, 0.0)
            gain += np.where(nb & movable & up & (d > DUAL_TOL), d, 0.0)
            cand = np.nonzero(gain > 0)[0]
            if not len(cand):
                return
            j = int(cand[0]) if bland else int(np.argmax(gain))
            step_dir = -1.0 if up[j] else 1.0
            alpha = self.ftran(self._column(j))
            rate = -step_dir * alpha  # change of x_B per unit move of x_j
            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = rate < -PIVOT_TOL
            inc = rate > PIVOT_TOL
            ratios[dec] = (xb[dec] - lbb[dec]) / -rate[dec]
            ratios[inc] = (ubb[inc] - xb[inc]) / rate[inc]
            ratios = np.maximum(ratios, 0.0)
            flip = self.ub[j] - self.lb[j]
            t = float(ratios.min()) if self.m else np.inf
            if not np.isfinite(min(t, flip)):
                raise _Unbounded()
            if flip <= t:
                self.x[j] += step_dir * flip
                self.x[self.basis] += rate * flip
                self.upper[j] = not up[j]
                degenerate = 0
                continue
            ties = np.nonzero(ratios <= t + 1e-12)[0]
            if bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            self.x[j] += step_dir * t
            self.x[self.basis] += rate * t
            leaving = int(self.basis[r])
            hit_upper = rate[r] > 0
            self.x[leaving] = self.ub[leaving] if hit_upper else self.lb[leaving]
            self.upper[leaving] = hit_upper
            self.upper[j] = False
            self._pivot(r, j, alpha)
            if t <= 1e-12:
                degenerate += 1
                if degenerate > 50:
                    bland = True
            else:
                degenerate, bland = 0, False
        raise SolverError("simplex iteration limit")

    def dual(self, cost, max_iter: int = 200000) -> None:
        """Restore primal feasibility from a dual feasible basis after bound changes."""
        n = self.n_cols
        movable = self.ub - self.lb > PRIMAL_TOL
        for _ in range(max_iter):
            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            below = lbb - xb
            above = xb - ubb
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if self.m else 0
            if not self.m or viol[r] <= PRIMAL_TOL:
                return
            raise_it = below[r] > above[r]
            e = np.zeros(self.m)
            e[r] = 1.0
            row = self.A.T @ self.btran(e)
            d = self._reduced(cost)
            nb = np.ones(n, dtype=bool)
            nb[self.basis] = False
            up = self.upper
            # x_Br moves by -row_j * (delta x_j)
            if raise_it:
                ok = nb & movable & ((~up & (row < -PIVOT_TOL)) | (up & (row > PIVOT_TOL)))
            else:
                ok = nb & movable & ((~up & (row > PIVOT_TOL)) | (up & (row < -PIVOT_TOL)))
            cand = np.nonzero(ok)[0]
            if not len(cand):
                raise _Infeasible()
            ratios = np.abs(d[cand]) / np.abs(row[cand])
            best = ratios.min()
            pick = cand[ratios <= best + 1e-12]
            j = int(pick[np.argmax(np.abs(row[pick]))])
            alpha = self.ftran(self._column(j))
            target = lbb[r] if raise_it else ubb[r]
            delta_xj = (xb[r] - target) / alpha[r]
            self.x[j] += delta_xj
            self.x[self.basis] -= alpha * delta_xj
            leaving = int(self.basis[r])
            self.x[leaving] = target
            self.upper[leaving] = not raise_it
            self.upper[j] = False
            self._pivot(r, j, alpha)
        raise SolverError("dual simplex iteration limit")

    def solve_root(self) -> None:
        self.crash()
        if self.n_art:
            base = self.n_cols - self.n_art
            phase1 = np.zeros(self.n_cols)
            phase1[base:] = 1.0
            self.primal(phase1)
            if phase1 @ self.x > 1e-6:
                raise _Infeasible()
            self.ub[base:] = 0.0
            self.x[base:] = 0.0
            self.upper[base:] = False
        self.primal(self.c)

    def resolve(self) -> None:
        """Re-optimize after bound changes, starting from the current basis."""
        self.refactor()
        self.dual(self.c)
        self.primal(self.c)

    @property
    def objective(self) -> float:
        return float(self.c @ self.x)

    def structural(self) -> np.ndarray:
        return self.x[: self.n_struct].copy()


# --------------------------------------------------------------------------
# branch and bound


@dataclass(order=True)
class _Node:
    bound: float
    neg_depth: int
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    parent: Optional[Tableau] = field(compare=False, default=None)


def _objective_is_integral(model: MilpModel) -> bool:
    c = model.obj
    costed = c != 0
    if np.any(costed & ~model.integer & ~np.isin(np.arange(model.n_vars), list(model.nonuse.values()))):
        return False
    return bool(np.all(np.abs(c - np.round(c)) < 1e-9))


def _branch_var(model: MilpModel, x: np.ndarray, option_cols: np.ndarray) -> Optional[int]:
    frac = np.abs(x - np.round(x))
    frac_int = model.integer & (frac > INT_TOL)
    if not frac_int.any():
        return None
    for pool in (frac_int & option_cols, frac_int):
        idx = np.nonzero(pool)[0]
        if len(idx):
            return int(idx[np.argmin(np.abs(x[idx] - 0.5))])
    return None


def _snap(model: MilpModel, x: np.ndarray) -> np.ndarray:
    y = x.copy()
    y[model.integer] = np.round(y[model.integer])
    # continuous columns (slot nonuse) are integral at any integral selection; drop LP noise
    near = ~model.integer & (np.abs(y - np.round(y)) <= PRIMAL_TOL)
    y[near] = np.round(y[near])
    return np.clip(y, model.lb, model.ub)


def solve_builtin(model: MilpModel, time_limit: Optional[float] = None, node_limit: int = 20000,
                  gap: float = 0.0, warm=None) -> SolveOutcome:
    t0 = time.perf_counter()
    A, b, eq = model.matrix()
    incumbent, inc_obj, used_warm = None, math.inf, False
    warm = warm if warm is not None else model.warm
    if warm is not None and warm.complete:
        x = np.zeros(model.n_vars)
        for j, v in warm.values.items():
            x[j] = v
        if not model.violations(x):
            incumbent, inc_obj, used_warm = x, model.objective_value(x), True
    if incumbent is None and model.network is not None:
        x = fallback_assignment(model)
        if x is not None:
            incumbent, inc_obj = x, model.objective_value(x)

    integral_obj = _objective_is_integral(model)
    option_cols = np.zeros(model.n_vars, dtype=bool)
    for members in model.groups.values():
        for _, idx in members:
            option_cols[idx] = True

    def node_bound(v):
        return math.ceil(v - 1e-6) if integral_obj else v

    def stop_gap(bound):
        return inc_obj - bound <= max(gap * abs(inc_obj), 1e-6)

    root = Tableau(A, b, eq, model.obj, model.lb, model.ub)
    lp_iters = 0
    notes: list[str] = []
    try:
        root.solve_root()
    except _Infeasible:
        return SolveOutcome("infeasible" if incumbent is None else "optimal", incumbent,
                            None if incumbent is None else inc_obj, math.inf, "builtin",
                            seconds=time.perf_counter() - t0, used_warm_start=used_warm)
    lp_iters += root.iterations
    heap: list[_Node] = []
    counter = itertools.count()
    nodes = 0
    global_bound = node_bound(root.objective)
    status = "optimal"
    pending = [(root, global_bound, 0)]

    def process(tab: Tableau, bound: float, depth: int):
        nonlocal incumbent, inc_obj
        if bound >= inc_obj - 1e-6:
            return
        x = tab.structural()
        j = _branch_var(model, x, option_cols)
        if j is None:
            y = _snap(model, x)
            val = model.objective_value(y)
            if val < inc_obj - 1e-9 and not model.violations(y):
                incumbent, inc_obj = y, val
            return
        nlb, nub = tab.lb.copy(), tab.ub.copy()
        # up branch first in creation order: it usually fixes an option
        for lo, hi in ((1.0, 1.0), (0.0, 0.0)):
            clb, cub = nlb.copy(), nub.copy()
            clb[j], cub[j] = max(clb[j], lo), min(cub[j], hi)
            heapq.heappush(heap, _Node(bound, -(depth + 1), next(counter), clb, cub, tab))

    history: list[tuple[float, float]] = []

    def record(bound):
        if not history or history[-1] != (inc_obj, bound):
            history.append((inc_obj, bound))

    record(global_bound)
    process(root, global_bound, 0)
    record(global_bound)
    while heap:
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            status = "feasible-time-limit"
            break
        if nodes >= node_limit:
            status = "feasible-time-limit"
            notes.append(f"node limit {node_limit} reached")
            break
        global_bound = max(global_bound, heap[0].bound)
        record(global_bound)
        if stop_gap(global_bound):
            break
        nd = heapq.heappop(heap)
        if nd.bound >= inc_obj - 1e-6:
            continue
        nodes += 1
        tab = nd.parent.copy()
        tab.lb, tab.ub = nd.lb, nd.ub
        before = tab.iterations
        try:
            tab.resolve()
        except _Infeasible:
            continue
        except SolverError:
            # numerical trouble from the inherited basis: start this node over
            nv = model.n_vars
            tab = Tableau(A, b, eq, model.obj, nd.lb[:nv], nd.ub[:nv])
            before = 0
            try:
                tab.solve_root()
            except _Infeasible:
                continue
        lp_iters += tab.iterations - before
        process(tab, node_bound(tab.objective), -nd.neg_depth)
    if not heap:
        global_bound = inc_obj if incumbent is not None else math.inf
    elif status == "optimal":
        global_bound = max(global_bound, heap[0].bound) if heap else global_bound
    else:
        global_bound = min(global_bound, heap[0].bound)
    if incumbent is None:
        status = "infeasible" if status == "optimal" else "error"
    record(min(global_bound, inc_obj))
    return SolveOutcome(status, incumbent, None if incumbent is None else inc_obj, min(global_bound, inc_obj),
                        "builtin", nodes, lp_iters, time.perf_counter() - t0, used_warm, notes, history=history)


# --------------------------------------------------------------------------
# HiGHS through scipy


def solve_highs(model: MilpModel, time_limit: Optional[float] = None, gap: float = 0.0,
                warm=None) -> SolveOutcome:
    from scipy.optimize import Bounds, LinearConstraint, milp

    t0 = time.perf_counter()
    lp = read_lp(export_text(model))
    if lp.names != model.names:
        raise SolverError("exported column order differs from the model")
    lo = np.where(np.array(lp.senses) == "<=", -np.inf, lp.b)
    hi = np.where(np.array(lp.senses) == ">=", np.inf, lp.b)
    cons = LinearConstraint(lp.A, lo, hi) if len(lp.b) else None
    opts = {"disp": False, "mip_rel_gap": gap}
    if time_limit is not None:
        opts["time_limit"] = max(0.01, float(time_limit))
    res = milp(lp.obj, integrality=lp.integer.astype(int), bounds=Bounds(lp.lb, lp.ub),
               constraints=cons, options=opts)
    x = None if res.x is None else _snap(model, np.asarray(res.x))
    status = {0: "optimal", 1: "feasible-time-limit"}.get(res.status, "infeasible" if res.status == 2 else "error")
    if x is not None and model.violations(x):
        x = None
    obj = None if x is None else model.objective_value(x)
    used_warm = False
    warm = warm if warm is not None else model.warm
    if warm is not None and warm.complete and warm.objective is not None and (obj is None or warm.objective < obj - 1e-9):
        x = np.zeros(model.n_vars)
        for j, v in warm.values.items():
            x[j] = v
        obj, used_warm = warm.objective, True
    if x is None and status == "feasible-time-limit":
        status = "error"
    bound = getattr(res, "mip_dual_bound", None)
    bound = float(bound) if bound is not None and np.isfinite(bound) else (obj if obj is not None else math.inf)
    return SolveOutcome(status, x, obj, bound, "highs", int(getattr(res, "mip_node_count", 0) or 0), 0,
                        time.perf_counter() - t0, used_warm)


AUTO_BUILTIN_MAX_VARS = 6000


def solve(model: MilpModel, backend: str = "builtin", time_limit: Optional[float] = None,
          node_limit: int = 20000, gap: float = 0.0, warm=None) -> SolveOutcome:
    """Solve ``model`` with the chosen backend ("builtin", "highs" or "auto")."""
    if backend == "auto":
        backend = "builtin" if model.n_vars <= AUTO_BUILTIN_MAX_VARS else "highs"
    out = _dispatch(model, backend, time_limit, node_limit, gap, warm)
    out.names = list(model.names)
    return out


def _dispatch(model, backend, time_limit, node_limit, gap, warm) -> SolveOutcome:
    if backend == "builtin":
        return solve_builtin(model, time_limit, node_limit, gap, warm)
    if backend == "highs":
        try:
            import scipy.optimize  # noqa: F401
        except ImportError:
            warnings.warn("HiGHS backend unavailable; using the built-in solver", RuntimeWarning)
            return solve_builtin(model, time_limit, node_limit, gap, warm)
        return solve_highs(model, time_limit, gap, warm)
    raise ValueError(f"unknown backend {backend!r}")


# --------------------------------------------------------------------------
# brute-force oracle


class OracleRefused(RuntimeError):
    pass


ORACLE_LIMIT = 10 ** 6


def enumerate_oracle(model: MilpModel, limit: int = ORACLE_LIMIT) -> SolveOutcome:
    """Optimal assignment by depth-first enumeration of one option per group.

    Feasibility of a complete assignment is decided on the network itself
    (one path per subnetwork through the chosen arcs, slot room, duty), so the
    result does not depend on any LP machinery.
    """
    if model.network is None:
        raise OracleRefused("model has no network")
    groups = list(model.groups.items())
    total = 1
    for _, members in groups:
        total *= len(members)
        if total > limit:
            raise OracleRefused(f"more than {limit} combinations")
    state = model.network.state
    costs = [[float(sum(model.obj[j] for j in idx)) for _, idx in members] for _, members in groups]
    order = [sorted(range(len(members)), key=lambda k: costs[g][k]) for g, (_, members) in enumerate(groups)]
    rest_min = [0.0] * (len(groups) + 1)
    for g in range(len(groups) - 1, -1, -1):
        rest_min[g] = rest_min[g + 1] + min(costs[g])
    slot_pen = {sid: model.obj[j] for sid, j in model.nonuse.items()}
    router = Router(model.network)
    best = [math.inf, None]
    explored = 0
    pick: dict = {}

    def dfs(g: int, acc: float):
        nonlocal explored
        if acc + rest_min[g] >= best[0] - 1e-9 and not (slot_pen and any(v < 0 for v in slot_pen.values())):
            return
        if g == len(groups):
            explored += 1
            x, problems = route_assignment(model, dict(pick), router)
            if x is None:
                return
            val = model.objective_value(x)
            if val < best[0] - 1e-9:
                best[0], best[1] = val, x
            return
        ent, members = groups[g]
        for k in order[g]:
            pick[ent] = members[k][0]
            dfs(g + 1, acc + costs[g][k])
        pick.pop(ent, None)

    t0 = time.perf_counter()
    dfs(0, 0.0)
    if best[1] is None:
        return SolveOutcome("infeasible", None, None, math.inf, "oracle", explored, 0, time.perf_counter() - t0,
                            names=list(model.names))
    return SolveOutcome("optimal", best[1], best[0], best[0], "oracle", explored, 0, time.perf_counter() - t0,
                        names=list(model.names))


def kind_counts(model: MilpModel, x) -> dict[str, int]:
    out = {k.value: 0 for k in OptionKind}
    for opt in model.chosen(x).values():
        out[opt.kind.value] += 1
    return out
