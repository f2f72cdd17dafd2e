import pytest

from blowuplab.grid import ModelParams, build_grid


@pytest.fixture(scope="session")
def p3():
    return ModelParams(3.0)


@pytest.fixture(scope="session")
def grid3(p3):
    return build_grid(p3, 64)


@pytest.fixture(scope="session")
def grid3_fine(p3):
    return build_grid(p3, 128)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record one summary line per acceptance criterion; printed at the end of the session."""
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
