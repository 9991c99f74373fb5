import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, title): acceptance criterion checked by the test"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": False})
    if rep.when == "call":
        entry["ran"] = True
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {e['title']}")
