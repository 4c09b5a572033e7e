from __future__ import annotations

import pytest

_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        previous = _RESULTS.get(number, (title, "PASS"))[1]
        verdict = "PASS" if report.passed and previous == "PASS" else "FAIL"
        _RESULTS[number] = (title, verdict)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_RESULTS):
        title, verdict = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
