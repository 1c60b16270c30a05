import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hypimcf.starshape import PolarGrid

# derandomized so repeated runs draw the same examples
settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

SEED = 20240611

ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def grid3():
    return PolarGrid(3, 512)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


OFFSET_LEVELS = (0.5, 1.0, 1.5, 2.0, 2.4, 2.8, 3.2)


@pytest.fixture(scope="session")
def offset_weak():
    """Weak solve for the off-centre sphere with r- = 1, r+ = 2 (n = 3, 128 x 64)."""
    from hypimcf.weakflow import AnnulusMesh, offset_sphere_graph, outer_radius, weak_limit

    start = time.perf_counter()
    g = offset_sphere_graph(PolarGrid(3, 257), 1.5, 0.5)
    mesh = AnnulusMesh(g, outer_radius(2.0, 3, 3.5), 128, 64)
    res = weak_limit(mesh, (0.2, 0.1, 0.05, 0.025), levels=OFFSET_LEVELS, jumps=False)
    res.elapsed = time.perf_counter() - start
    return res
