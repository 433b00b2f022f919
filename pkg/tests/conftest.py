import math

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def random_symmetric(rng, shape):
    n = math.prod(shape)
    G = rng.standard_normal((n, n))
    return (0.5 * (G + G.T)).reshape(tuple(shape) * 2)


def random_spd(rng, shape, floor=0.1):
    n = math.prod(shape)
    G = rng.standard_normal((n, n))
    return (G @ G.T / n + floor * np.eye(n)).reshape(tuple(shape) * 2)


def random_group_shape(rng, max_size, max_modes=3, max_extent=5):
    while True:
        m = int(rng.integers(1, max_modes + 1))
        shape = tuple(int(s) for s in rng.integers(1, max_extent + 1, size=m))
        if 2 <= math.prod(shape) <= max_size:
            return shape


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
