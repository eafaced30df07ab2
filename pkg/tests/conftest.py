import numpy as np
import pytest

from pica.world import generate_world


@pytest.fixture(scope="session")
def small_world():
    return generate_world(6, 3, 12, 8, seed=11)


@pytest.fixture(scope="session")
def default_world():
    return generate_world(48, 17, 64, 32, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
