import warnings

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20181015)


@pytest.fixture(autouse=True)
def _quiet_rank_guard():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="only .* nonzero canonical correlations")
        yield


def random_path(rng, n_x, n_y):
    """Uniformly random legal walk from (0,0) to (n_x-1, n_y-1)."""
    i = j = 0
    out = [(0, 0)]
    while (i, j) != (n_x - 1, n_y - 1):
        moves = [(di, dj) for di, dj in ((1, 0), (0, 1), (1, 1)) if i + di < n_x and j + dj < n_y]
        di, dj = moves[rng.integers(len(moves))]
        i, j = i + di, j + dj
        out.append((i, j))
    return out


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
