"""Shared fixtures and the per-criterion acceptance summary."""

from collections import defaultdict

import pytest

from selfaffine.config import PRESETS

_CRITERIA = defaultdict(list)

CRITERION_NAMES = {
    1: "Hadamard verification of presets, broken pair rejected",
    2: "product-triple towers stay unitary",
    3: "frame bounds equal 1 for J = L_n^T",
    4: "zero set of the R=[4 0; 1 2] example reproduced",
    5: "no zero-set obstruction for R=[4 0; 1 4] and quarter Cantor",
    6: "completeness sums Q_K for quarter Cantor",
    7: "delta(Lambda) positive, stable, exact zero detected",
    8: "subset search optima reproducible, greedy within 10%",
    9: "concatenated stages within product bounds",
    10: "step-function frame inequality",
    11: "lattice layer exactness and property suite",
    12: "transform oracles and quadrature identity",
}


def triple(name):
    p = PRESETS[name]
    return p["R"], [tuple(b) for b in p["B"]], [tuple(l) for l in p["L"]]


@pytest.fixture
def presets():
    return PRESETS


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for mark in getattr(report, "criterion_marks", ()):
        _CRITERIA[mark].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    rep.criterion_marks = tuple(m.args[0] for m in item.iter_markers(name="criterion"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        ok = all(r == "passed" for r in results)
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {verdict}  {CRITERION_NAMES.get(n, '')} ({len(results)} checks)")
