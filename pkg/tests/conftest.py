import numpy as np
import pytest

from cdspace import path_space


def interval_uniform(space, lo, hi):
    """Normalized m restricted to the grid points of [lo, hi] on a path space of [0, 1]."""
    x = np.linspace(0.0, 1.0, len(space))
    return space.uniform_on(np.flatnonzero((x >= lo - 1e-12) & (x <= hi + 1e-12)))


@pytest.fixture
def path3():
    from cdspace import build_from_graph
    return build_from_graph([("0", 1), ("1", 1), ("2", 1)], [("0", "1", 1), ("1", "2", 1)])


@pytest.fixture
def cycle4():
    from cdspace import build_from_graph
    v = [(str(i), 1) for i in range(4)]
    e = [(str(i), str((i + 1) % 4), 1) for i in range(4)]
    return build_from_graph(v, e)


@pytest.fixture(scope="session")
def path17():
    return path_space(17)
