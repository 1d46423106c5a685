import pytest

# criterion number -> (description, passed) gathered while the acceptance
# module runs, printed as one line each at the end of the session
_ACCEPTANCE_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(num, description): acceptance criterion covered by this test",
    )


def _record(num, description, passed):
    previous = _ACCEPTANCE_RESULTS.get(num)
    if previous is not None:
        passed = passed and previous[1]
    _ACCEPTANCE_RESULTS[num] = (description, passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, description = marker.args
    if report.when == "call":
        _record(num, description, report.passed)
    elif report.failed:  # setup or teardown blew up
        _record(num, description, False)
    elif report.skipped:
        _record(num, description, False)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE_RESULTS):
        description, passed = _ACCEPTANCE_RESULTS[num]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num} [{status}] {description}")
