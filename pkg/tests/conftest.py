"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import pytest

_LINES = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if "test_acceptance.py" not in item.nodeid:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        status = "PASS" if rep.passed else "FAIL"
        _LINES.append(f"{status}  {doc}" + (f"  [{detail}]" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
