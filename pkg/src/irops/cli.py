"""``irops`` command line.

Exit status: 0 success, 1 diagnostics (invalid instance, plan failing
verification), 2 hard error (bad flags, unreadable input, solver failure).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import demo_dir
from .bench import BenchConfig, BenchReport, VerificationError, parse_seeds, run_bench, run_pipeline
from .generator import TIERS, generate_instance, tier_config
from .io import InstanceFormatError, PlanError, apply_orders, dumps_orders, loads_orders, read_instance, write_instance
from .model import apply_disruptions, validate_instance

log = logging.getLogger("irops")

DIAGNOSTICS = 1
HARD_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse already exits with 2; keep the usage text on stderr
        self.print_usage(sys.stderr)
        self.exit(HARD_ERROR, f"{self.prog}: error: {message}\n")


def _env_float(name: str, default: Optional[float]) -> Optional[float]:
    raw = os.environ.get(name)
    return default if raw in (None, "") else float(raw)


def _budget_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("budgets")
    g.add_argument("--budget", type=float, default=_env_float("IROPS_BUDGET", 600.0),
                   help="wall seconds per run (env IROPS_BUDGET, default 600)")
    g.add_argument("--no-wall-budget", action="store_true",
                   help="use only --max-iterations/--generations; required for reproducible output")
    g.add_argument("--acr-share", type=float, default=0.6, help="fraction of the budget given to ACR")
    g.add_argument("--max-iterations", type=int, default=10)
    g.add_argument("--generations", type=int, default=None, help="GA generations (count budget)")
    g.add_argument("--option-budget", type=int, default=None, help="change options per build/expand step")
    g.add_argument("--backend", choices=("auto", "builtin", "highs"), default=os.environ.get("IROPS_BACKEND", "auto"))
    g.add_argument("--seed", type=int, default=0, help="GA seed")
    g.add_argument("--workers", type=int, default=int(os.environ.get("IROPS_THREADS", "1")),
                   help="GA evaluation processes (env IROPS_THREADS)")


def _bench_config(a) -> BenchConfig:
    if not 0.0 < a.acr_share <= 1.0:
        raise argparse.ArgumentTypeError("--acr-share must be in (0, 1]")
    budget = None if a.no_wall_budget else a.budget
    if budget is None and a.generations is None:
        raise argparse.ArgumentTypeError("--no-wall-budget needs --generations")
    return BenchConfig(budget=budget, acr_share=a.acr_share, backend=a.backend, seed=a.seed, workers=a.workers,
                       max_iterations=a.max_iterations, generations=a.generations, option_budget=a.option_budget)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="irops", description="Airline disruption recovery.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check an instance; silent when valid")
    v.add_argument("instance", help="instance directory, .json file, or 'demo'")

    s = sub.add_parser("solve", help="recover an instance and write change orders")
    s.add_argument("instance")
    s.add_argument("-o", "--out", type=Path, default=Path("irops-out"))
    s.add_argument("--orders-format", choices=("json", "csv"), default="json")
    s.add_argument("--plots", action="store_true", help="also write problem and solution SVGs")
    _budget_flags(s)

    g = sub.add_parser("gen-instance", help="write a generated instance")
    g.add_argument("--tier", choices=sorted(TIERS), default="small")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("-o", "--out", type=Path, required=True, help="directory (CSV tables) or .json file")

    pl = sub.add_parser("plot", help="render an SVG")
    pl.add_argument("what", choices=("problem", "tsn", "solution"))
    pl.add_argument("instance")
    pl.add_argument("-o", "--out", type=Path, required=True)
    pl.add_argument("--network", help="TSN subnetwork, e.g. aircraft:A#3 (default: all)")
    pl.add_argument("--orders", type=Path, help="change orders to draw (solution plots)")

    b = sub.add_parser("bench", help="benchmark generated instances")
    b.add_argument("--tier", choices=sorted(TIERS), default="small")
    b.add_argument("--seeds", default="1..10", help="e.g. 1..10 or 1,3,5")
    b.add_argument("-o", "--out", type=Path, default=Path("irops-bench"))
    b.add_argument("--parallel", type=int, default=1, help="instances run concurrently")
    _budget_flags(b)
    return p


def _load(where: str):
    path = Path(where)
    if where == "demo" and not path.exists():
        path = demo_dir()
    if not path.exists():
        raise FileNotFoundError(f"no such instance: {where}")
    return read_instance(path)


def cmd_validate(a) -> int:
    inst = _load(a.instance)
    diags = validate_instance(inst)
    for d in diags:
        print(d)
    return DIAGNOSTICS if diags else 0


def cmd_solve(a) -> int:
    config = _bench_config(a)
    inst = _load(a.instance)
    diags = validate_instance(inst)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return DIAGNOSTICS
    try:
        res = run_pipeline(inst, config)
    except VerificationError as e:
        for p in e.problems:
            print(p, file=sys.stderr)
        return DIAGNOSTICS
    a.out.mkdir(parents=True, exist_ok=True)
    (a.out / f"orders.{a.orders_format}").write_text(dumps_orders(res.orders, a.orders_format))
    report = BenchReport([res.row])
    (a.out / "report.csv").write_text(report.to_csv())
    if a.plots:
        from .plotting import plot_problem, plot_solution

        plot_problem(res.state, a.out / "problem.svg")
        plot_solution(res.state, res.schedule, a.out / "solution.svg")
    v = res.row.values
    print(f"{inst.name}: {len(res.orders)} change orders, ACR {v['ACR Iters/Run']} iteration(s), "
          f"cost {v['Initial PaxR Cost']:g} -> {v['Final PaxR Cost']:g}; written to {a.out}")
    return 0


def cmd_gen(a) -> int:
    inst = generate_instance(tier_config(a.tier, a.seed))
    write_instance(inst, a.out)
    print(a.out)
    return 0


def cmd_plot(a) -> int:
    from .plotting import plot_problem, plot_solution, plot_tsn

    inst = _load(a.instance)
    state = apply_disruptions(inst)
    if a.what == "problem":
        plot_problem(state, a.out)
    elif a.what == "tsn":
        from .search import build_initial_space
        from .tsn import build_tsn

        tsn = build_tsn(build_initial_space(state), state)
        if a.network is not None and a.network not in {n.network for n in tsn.nodes}:
            print(f"no subnetwork {a.network!r}", file=sys.stderr)
            return HARD_ERROR
        plot_tsn(tsn, a.network, a.out)
    else:
        if a.orders is None:
            print("solution plots need --orders", file=sys.stderr)
            return HARD_ERROR
        fmt = "csv" if a.orders.suffix.lower() == ".csv" else "json"
        schedule, _ = apply_orders(state, loads_orders(a.orders.read_text(), fmt))
        plot_solution(state, schedule, a.out)
    return 0


def cmd_bench(a) -> int:
    config = _bench_config(a)
    seeds = parse_seeds(a.seeds)
    report = run_bench(a.tier, seeds, config, parallel=a.parallel)
    a.out.mkdir(parents=True, exist_ok=True)
    (a.out / "report.csv").write_text(report.to_csv())
    tables = report.tables()
    (a.out / "tables.md").write_text(tables)
    print(tables, end="")
    return 0


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "gen-instance": cmd_gen, "plot": cmd_plot,
            "bench": cmd_bench}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[a.command](a)
    except argparse.ArgumentTypeError as e:
        parser.print_usage(sys.stderr)
        print(f"irops: error: {e}", file=sys.stderr)
        return HARD_ERROR
    except InstanceFormatError as e:
        print(f"irops: invalid instance: {e}", file=sys.stderr)
        return DIAGNOSTICS
    except (OSError, ValueError, KeyError, PlanError, RuntimeError) as e:
        print(f"irops: error: {e}", file=sys.stderr)
        return HARD_ERROR


if __name__ == "__main__":
    sys.exit(main())
