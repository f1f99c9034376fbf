import sys

import numpy as np
import pytest

from fracsr.geometry import VoxelCloud

SCALES = ["16/15", "8/7", "4/3", "3/2", "2"]


@pytest.fixture
def rng():
    return np.random.default_rng(20221016)


def blob(rng, n, depth, spread=None):
    """Clustered random cloud, so neighbourhoods are non-trivial."""
    hi = 1 << depth
    spread = spread or max(4, hi // 8)
    centre = rng.integers(spread, hi - spread, size=3)
    pts = centre + rng.integers(-spread, spread, size=(n, 3))
    return VoxelCloud(np.clip(pts, 0, hi - 1), depth=depth)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
