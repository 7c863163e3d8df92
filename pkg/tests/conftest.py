import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vkdshell.grid import GridSpec
from vkdshell.model import ModelContext

settings.register_profile(
    "default",
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", 40)),
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

SCHEMES = ("left", "right", "spectral")
BOUNDARIES = ("quarter", "full")

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


def dense(op, n):
    """Dense matrix of a linear map on R^n by applying it to the unit vectors."""
    eye = np.eye(n)
    return np.column_stack([op(eye[:, j]) for j in range(n)])


def random_field(rng, grid, zero_mean=True, scale=1.0):
    w = scale * rng.standard_normal(grid.size)
    return w - w.mean() if zero_mean else w


def small_context(M=5, N=4, boundary="quarter", scheme="left", a=3.0, b=2.5):
    return ModelContext(GridSpec(a, b, M, N, boundary, scheme))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_problem():
    """Single-dimple solution at lambda = 1.4 on a 25 x 25 quarter domain (50 x 50 cells), Newton-polished."""
    from vkdshell.pipelines import ProblemConfig, mountain_pass

    ctx = ProblemConfig(25.0, 25.0, 0.5).context()
    return ctx, mountain_pass(ctx, 1.4)
