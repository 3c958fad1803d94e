import numpy as np
import pytest

from budgetopt.instance import Instance, Kind

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Collects one PASS/FAIL line per acceptance criterion."""

    def emit(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def k3():
    # edges (0,1), (0,2), (1,2)
    return Instance.from_arrays(Kind.COMPLETE, 3, [0.1, 0.2, 0.3], [0.3, 0.1, 0.2])


@pytest.fixture
def two_by_two():
    w = [[0.1, 0.4], [0.5, 0.2]]
    c = [[0.9, 0.1], [0.1, 0.8]]
    return Instance.from_arrays(Kind.COMPLETE_BIPARTITE, 2, w, c)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
