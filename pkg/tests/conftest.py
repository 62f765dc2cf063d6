import numpy as np
import pytest

from rkaczmarz.generators import gaussian_shifted_duplicate, random_consistent
from rkaczmarz.linalg import svd


def gaussian(m, n, seed):
    return np.random.default_rng(seed).standard_normal((m, n))


@pytest.fixture(scope="session")
def system_50x20():
    a, x, b = random_consistent(50, 20, 1)
    return a, x, b, svd(a)


@pytest.fixture(scope="session")
def planted_100():
    a = gaussian_shifted_duplicate(100, 100.0, 0.01, 7)
    return a, svd(a)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
