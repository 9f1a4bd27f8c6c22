"""Collects one pass/fail line per acceptance criterion and prints them at the end of the run."""

import pytest

RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    number, title = mark.args
    entry = RESULTS.setdefault(number, {"title": title, "ok": True, "notes": []})
    if rep.failed or hasattr(rep, "wasxfail"):
        entry["ok"] = False
        if hasattr(rep, "wasxfail"):
            entry["notes"].append(f"expected failure: {rep.wasxfail}")
    entry["notes"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        e = RESULTS[number]
        verdict = "PASS" if e["ok"] else "FAIL"
        notes = "; ".join(e["notes"])
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {e['title']}  [{notes}]")
