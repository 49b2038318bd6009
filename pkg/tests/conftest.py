import numpy as np
import pytest

from timing_hedge import BarrierContract, GbmParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def base_contract():
    return BarrierContract(80.0, 90.0, 1.0, 0.6)


@pytest.fixture
def base_params():
    return GbmParams(0.03, 0.2)


@pytest.fixture
def report():
    """Record one acceptance line; the summary is printed at the end of the session."""

    def _report(criterion: int, ok: bool, detail: str):
        line = f"criterion {criterion:>2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
