"""Shared fixtures plus the visible PASS/FAIL line for acceptance tests."""

import pytest

from icplan.instances import line_instance
from icplan.solver import solve_problem


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(label): criterion test that reports a visible PASS/FAIL line")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    verdict = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    line = f"ACCEPTANCE {marker.args[0]}: {verdict}"
    capman = item.config.pluginmanager.getplugin("capturemanager")
    if capman is not None:
        with capman.global_and_fixture_disabled():
            print(f"\n{line}", flush=True)
    else:
        print(f"\n{line}", flush=True)


@pytest.fixture(scope="session")
def line4():
    """The 4-state relay line with agents at both ends and the middle."""
    return line_instance(4)


@pytest.fixture(scope="session")
def line4_solution(line4):
    net, spec = line4
    model, result, plan = solve_problem(spec)
    assert result.ok and plan is not None
    return spec, model, result, plan
