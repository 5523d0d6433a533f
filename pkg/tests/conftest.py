import sys

import numpy as np
import pytest

from aeroground.sim.scenes import synthetic_scene
from aeroground.spatial import Raster


def smooth_image(n=64, seed=0):
    """Band-limited random field in [0, 1]."""
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    f = gaussian_filter(rng.random((n, n)), 3.0, mode="wrap")
    f = (f - f.min()) / (f.max() - f.min())
    return f


@pytest.fixture(scope="session")
def scene():
    return Raster(synthetic_scene(256, seed=0)[0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
