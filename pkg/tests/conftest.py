"""Prints one pass/fail line per acceptance criterion after the run."""

import re

_RESULTS: dict[str, tuple[str, float, str]] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _RESULTS[report.nodeid] = (f"{int(m.group(1)):2d} {m.group(2)}", report.duration, f"{status}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, dur, line in sorted(_RESULTS.values()):
        terminalreporter.write_line(f"criterion {name:<28s} {dur:7.1f}s  {line}")
