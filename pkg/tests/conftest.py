import pytest

from nodal_shooter.nonlin import make_params

THETAS = (0.1, 0.25, 0.4)
DIMS = (2, 3)


@pytest.fixture
def P3():
    return make_params(3, 0.25)


@pytest.fixture
def P2():
    return make_params(2, 0.25)

# verdict lines gathered by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
