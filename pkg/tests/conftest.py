import numpy as np
import pytest

from qobs.filtering import solve_steady_riccati
from qobs.plants import REFERENCE_PLANTS

_acceptance = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240615)


@pytest.fixture(scope="session")
def reference_syntheses():
    """Steady-state synthesis of every reference plant at default settings."""
    out = {}
    for name, factory in REFERENCE_PLANTS.items():
        sys = factory()
        out[name] = (sys, solve_steady_riccati(sys))
    return out


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    label = getattr(report, "acceptance_label", None)
    if label is None:
        return
    ok = report.outcome == "passed"
    prev = _acceptance.get(label, (True, []))
    failed = prev[1] + ([report.nodeid.split("::")[-1]] if not ok else [])
    _acceptance[label] = (prev[0] and ok, failed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().acceptance_label = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")

    def key(label):
        head = label.split()[0]
        return (int(head[2:]) if head[2:].isdigit() else 99, label)

    for label in sorted(_acceptance, key=key):
        ok, failed = _acceptance[label]
        line = f"{'PASS' if ok else 'FAIL'}  {label}"
        if failed:
            line += f"  (failing: {', '.join(failed)})"
        tr.write_line(line, green=ok, red=not ok)
