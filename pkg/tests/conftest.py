import pytest

# criterion number -> (title, [(passed, detail), ...]); parametrized checks merge
_RESULTS: dict[int, tuple[str, list[tuple[bool, str]]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion being checked")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _RESULTS.setdefault(number, (title, []))[1].append((report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, runs = _RESULTS[number]
        status = "PASS" if all(ok for ok, _ in runs) else "FAIL"
        details = "; ".join(d for _, d in runs if d)
        line = f"{status} criterion {number}: {title}"
        terminalreporter.write_line(f"{line} [{details}]" if details else line)
