import pytest

from pertbound.gadget import GadgetSpec, build_gadget
from pertbound.oracle import ExactSeries

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def gadget():
    return build_gadget(GadgetSpec(1e-3, 1e-3, 1.0))


@pytest.fixture(scope="session")
def gadget_operators(gadget):
    return gadget.operators()


@pytest.fixture(scope="session")
def gadget_series(gadget, gadget_operators):
    h, v = gadget_operators
    return ExactSeries(h, v, gadget.config.cutoff)


@pytest.fixture
def record():
    def _record(criterion: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
