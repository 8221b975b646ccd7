from __future__ import annotations

import pytest

# criterion number -> (description, outcome)
_ACCEPTANCE: dict[int, list] = {}


def pytest_addoption(parser):
    parser.addoption("--update-goldens", action="store_true", help="rewrite tests/golden from current output")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by a test")


@pytest.fixture
def update_goldens(request) -> bool:
    return request.config.getoption("--update-goldens")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, text = mark.args
            _ACCEPTANCE[number] = [text, "NOT RUN", item.nodeid]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    entry = _ACCEPTANCE[mark.args[0]]
    if report.failed:
        entry[1] = "FAIL"
    elif report.when == "call" and report.passed and entry[1] != "FAIL":
        entry[1] = "PASS"
    elif report.skipped:
        entry[1] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        text, status, _ = _ACCEPTANCE[number]
        terminalreporter.write_line(f"ACCEPTANCE C{number:02d} {status}: {text}")
    passed = sum(1 for _, s, _ in _ACCEPTANCE.values() if s == "PASS")
    terminalreporter.write_line(f"ACCEPTANCE TOTAL {passed}/{len(_ACCEPTANCE)} passed")
