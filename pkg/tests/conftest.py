from __future__ import annotations

import pytest

CRITERIA = {
    1: "coincidence limit table",
    2: "zeta series",
    3: "geodesic triangles",
    4: "Jacobian and Lambda",
    5: "star product through hbar^4",
    6: "symbolic properties",
    7: "polynomial quantization",
    8: "numeric suite",
    9: "order scaling",
}

_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or rep.failed or rep.skipped:
        # expected failures count against the criterion: they pin literal reference values
        # that the computation does not reproduce
        good = rep.passed and not hasattr(rep, "wasxfail")
        note = None
        if hasattr(rep, "wasxfail"):
            note = f"{item.name}: {rep.wasxfail}"
        elif not good:
            note = item.name
        entry = _outcomes.setdefault(n, {"ok": True, "notes": []})
        entry["ok"] &= good
        if note:
            entry["notes"].append(note)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n not in _outcomes:
            continue
        e = _outcomes[n]
        line = f"criterion {n} ({title}): {'PASS' if e['ok'] else 'FAIL'}"
        if e["notes"]:
            line += " | " + "; ".join(e["notes"])
        tr.write_line(line)


@pytest.fixture(scope="session")
def numeric_reports():
    """Default numeric suite on the torus and the round sphere, computed once per session."""
    from geoweyl.numeric_manifolds import run_numeric_suite

    return {r.experiment: r for r in run_numeric_suite()}
