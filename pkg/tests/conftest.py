import pytest

from irops import demo_instance
from irops.model import apply_disruptions


@pytest.fixture(scope="session")
def demo():
    return demo_instance()


@pytest.fixture(scope="session")
def demo_state(demo):
    return apply_disruptions(demo)


_verdicts: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.skipped:
        return
    number, title = mark.args
    failed = report.failed or _verdicts.get(number, (None, "PASS"))[1] == "FAIL"
    if report.when == "call" or report.failed:
        _verdicts[number] = (title, "FAIL" if failed else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        title, verdict = _verdicts[number]
        terminalreporter.write_line(f"{verdict} criterion {number}: {title}")
