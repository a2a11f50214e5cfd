"""Shared pytest plumbing: the acceptance-criteria summary section.

Tests marked ``@pytest.mark.acceptance(index, label)`` get exactly one
PASS/FAIL line in the terminal summary, with any measured numbers a test
attached through the ``measured`` fixture.
"""

import pytest

_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(index, label): an acceptance criterion reported as one "
        "PASS/FAIL line in the terminal summary")


@pytest.fixture
def measured(request):
    """Attach a short measured-numbers string to the criterion's summary line."""

    def attach(detail: str) -> None:
        request.node._acceptance_detail = detail

    return attach


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    index, label = marker.args
    detail = getattr(item, "_acceptance_detail", "")
    if report.failed:
        _RESULTS[index] = (label, False, detail)
    elif report.when == "call" and report.passed:
        _RESULTS[index] = (label, True, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for index in sorted(_RESULTS):
        label, passed, detail = _RESULTS[index]
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"criterion {index}: {status} - {label}{suffix}")
