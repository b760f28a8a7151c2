import numpy as np
import pytest
from hypothesis import settings

from compact_splitting.operators import Grid1D, moving_quadratic

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def pot():
    return moving_quadratic()


@pytest.fixture
def grid16():
    return Grid1D(16, -6.0, 6.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
