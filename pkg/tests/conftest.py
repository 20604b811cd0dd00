from collections import defaultdict

import pytest

_outcomes: dict[int, list[tuple[str, str]]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    if call.excinfo is None:
        outcome = "pass"
    elif hasattr(item, "_xfail_hit") or item.get_closest_marker("xfail"):
        outcome = "xfail"
    else:
        outcome = "fail"
    _outcomes[marker.args[0]].append((item.name, outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        bad = [name for name, o in results if o != "pass"]
        status = "PASS" if not bad else "FAIL"
        line = f"criterion {n}: {status} ({len(results) - len(bad)}/{len(results)} checks)"
        if bad:
            line += " failing: " + ", ".join(bad)
        terminalreporter.write_line(line)
