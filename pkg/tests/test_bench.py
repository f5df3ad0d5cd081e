import numpy as np
import pytest

import irops.bench as bench
from irops.bench import (ACR_COLUMNS, INSTANCE_COLUMNS, PAXR_COLUMNS, ROW_COLUMNS, SUMMARY_COLUMNS, TIME_COLUMNS,
                         BenchConfig, BenchReport, BenchRow, VerificationError, parse_seeds, run_bench, run_pipeline)
from irops.generator import generate_instance, tier_config

# report headers, two header lines joined per column
HEADERS = {
    "instances": ["Airports", "Slotted Airp.", "Aircraft", "Crew Groups", "Flights", "Pass. Tickets",
                  "Multileg Conn.", "Flight Disrup.", "Maint.", "Airp. Slots"],
    "acr": ["Prox. (s)", "S.S. Gen. (s)", "TSN Const. (ms)", "TSN Optim. (s)", "Entire Iteration (s)"],
    "paxr": ["Sched. Improv. TTS (s)", "Evolution Generations"],
    "summary": ["Runs", "Full TTS (s)", "ACR Iters/Run", "Initial PaxR Cost", "Final PaxR Cost"],
}
COUNTS = BenchConfig(budget=None, generations=3, max_iterations=3, backend="builtin")


@pytest.fixture(scope="module")
def tiny_run():
    return run_pipeline(generate_instance(tier_config("tiny", 4)), COUNTS)


def test_columns_match_the_report_headers_one_to_one():
    ours = [INSTANCE_COLUMNS, ACR_COLUMNS, PAXR_COLUMNS, SUMMARY_COLUMNS]
    assert [list(c) for c in ours] == list(HEADERS.values())
    flat = ROW_COLUMNS[1:]
    assert len(flat) == len(set(flat)) == sum(map(len, HEADERS.values()))


def test_row_has_exactly_the_report_columns(tiny_run):
    assert set(tiny_run.row.values) == set(ROW_COLUMNS[1:])
    v = tiny_run.row.values
    assert v["Runs"] == 1 and v["Evolution Generations"] == 3
    assert v["Final PaxR Cost"] <= v["Initial PaxR Cost"]
    assert v["ACR Iters/Run"] == len(tiny_run.acr_schedule.iteration_log)


def test_tables_carry_every_header(tiny_run):
    text = BenchReport([tiny_run.row]).tables()
    header_lines = [line for line in text.splitlines() if line.startswith("| Instance |")]
    assert len(header_lines) == 4
    for line, cols in zip(header_lines, HEADERS.values()):
        assert [c.strip() for c in line.strip("|").split("|")][1:] == cols


def _fake_row(name, k):
    return BenchRow(name, {c: float(k * (i + 1)) for i, c in enumerate(ROW_COLUMNS[1:])})


def test_averages_are_column_means():
    rows = [_fake_row(f"small-{s}", s) for s in range(1, 11)] + [_fake_row("tiny-1", 100)]
    rep = BenchReport(rows)
    assert rep.groups() == ["small", "tiny"]
    avg = rep.averaged("small")
    table = np.array([[r.values[c] for c in ROW_COLUMNS[1:]] for r in rows[:10]])
    for j, c in enumerate(ROW_COLUMNS[1:]):
        want = 10 if c == "Runs" else table[:, j].mean()
        assert avg[c] == pytest.approx(want)


def test_csv_round_trip():
    rep = BenchReport([_fake_row("tiny-1", 1), _fake_row("tiny-2", 0.5)])
    again = BenchReport.from_csv(rep.to_csv())
    assert [r.instance for r in again.rows] == ["tiny-1", "tiny-2"]
    assert [r.values for r in again.rows] == [r.values for r in rep.rows]


@pytest.mark.parametrize("text,want", [("1..10", list(range(1, 11))), ("3", [3]), ("1,4,7", [1, 4, 7]),
                                       ("1..3,9", [1, 2, 3, 9])])
def test_parse_seeds(text, want):
    assert parse_seeds(text) == want


@pytest.mark.parametrize("text", ["", "5..2", "a..b"])
def test_parse_seeds_rejects(text):
    with pytest.raises(ValueError):
        parse_seeds(text)


def test_count_budget_needs_generations():
    with pytest.raises(ValueError):
        BenchConfig(budget=None).ga(0.0)
    assert BenchConfig(budget=100.0, acr_share=0.25).acr().time_budget == 25.0
    assert BenchConfig(budget=100.0).ga(70.0).time_budget == 30.0


def test_cost_columns_are_deterministic(tiny_run):
    again = run_pipeline(generate_instance(tier_config("tiny", 4)), COUNTS)
    assert again.row.costs() == tiny_run.row.costs()
    assert not set(again.row.costs()) & TIME_COLUMNS
    assert again.orders == tiny_run.orders


def test_failed_verification_stops_the_pipeline(monkeypatch):
    monkeypatch.setattr(bench, "check_feasibility", lambda schedule, state: ["rotation X broken"])
    with pytest.raises(VerificationError) as err:
        run_pipeline(generate_instance(tier_config("tiny", 4)), COUNTS)
    assert err.value.problems == ["rotation X broken"]


def test_bench_over_ten_seeds_averages_each_column():
    rep = run_bench("tiny", parse_seeds("1..10"), COUNTS)
    assert [r.instance for r in rep.rows] == [f"tiny-{s}" for s in range(1, 11)]
    avg = rep.averaged("tiny")
    assert avg["Runs"] == 10
    for c in ("Flights", "Final PaxR Cost", "ACR Iters/Run"):
        assert avg[c] == pytest.approx(sum(r.values[c] for r in rep.rows) / 10)
    parallel = run_bench("tiny", [1, 2, 3], COUNTS, parallel=2)
    assert [r.costs() for r in parallel.rows] == [r.costs() for r in rep.rows[:3]]
