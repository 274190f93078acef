from __future__ import annotations

import time

import pytest

from nanopteron.params import DimerParams
from nanopteron.solver import iterate_nanopteron

SWEEP_EPS = (0.2, 0.1, 0.05, 0.025)

_CACHE: dict = {}
SOLVE_SECONDS: dict = {}


def solved(eps: float, w: float = 2.0):
    """Converged ``(state, report, problem)`` at ``(eps, w)``, cached per session."""
    key = (w, eps)
    if key not in _CACHE:
        t0 = time.perf_counter()
        _CACHE[key] = iterate_nanopteron(DimerParams(w, eps))
        SOLVE_SECONDS[key] = time.perf_counter() - t0
    return _CACHE[key]


@pytest.fixture(scope="session")
def sol01():
    return solved(0.1)


@pytest.fixture(scope="session")
def sweep():
    return {e: solved(e) for e in SWEEP_EPS}


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
