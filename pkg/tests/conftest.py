from __future__ import annotations

import os

import pytest
from hypothesis import settings

from webmeasure.crawler import find_browser

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

SKIP_ENV = "WEBMEASURE_SKIP_BROWSER"


def pytest_addoption(parser):
    parser.addoption("--skip-browser", action="store_true", help="skip tests that drive a real browser")


# Where this sandbox keeps its browser; elsewhere rely on WEBMEASURE_BROWSER or PATH.
LOCAL_BROWSER = "/opt/chromium/chromium-wrapper"


def _browser_path() -> str | None:
    found = find_browser()
    if found:
        return found
    return LOCAL_BROWSER if os.path.exists(LOCAL_BROWSER) else None


@pytest.fixture(scope="session")
def browser_path(request) -> str:
    if request.config.getoption("--skip-browser") or os.environ.get(SKIP_ENV):
        pytest.skip("browser tests disabled by flag")
    path = _browser_path()
    if not path:
        pytest.skip("no Chromium-family browser found (set WEBMEASURE_BROWSER)")
    return path


# One summary line per acceptance criterion, printed after the run.
_criteria: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        state = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        previous = _criteria.get(number, ("PASS", title))[0]
        # A criterion with several tests is only as good as its worst one.
        if previous == "FAIL" or (previous == "SKIP" and state == "PASS"):
            state = previous
        _criteria[number] = (state, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        state, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {state}  {title}")
