import numpy as np
import pytest

from layercast.fading import Erlang

ACCEPTANCE_LINES = []


@pytest.fixture
def rayleigh():
    return Erlang(1, 1.0)


@pytest.fixture
def report():
    """Collect one pass/fail line per acceptance criterion."""

    def _report(tag, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def golden_section(fun, lo, hi, tol=1e-10):
    """Plain golden-section search, kept independent of the solvers."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
