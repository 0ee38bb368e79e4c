import math

import pytest
from hypothesis import HealthCheck, settings

from latticewaves import registry, solve_wavetrain

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ex1():
    return registry("ex1")


@pytest.fixture(scope="session")
def ex1_quarter(ex1):
    """Ex1, q = 0, alpha = 5, k = pi/4 on the default grid."""
    return solve_wavetrain(ex1, math.pi / 4, alpha=5.0)


@pytest.fixture(scope="session")
def ex1_half(ex1):
    return solve_wavetrain(ex1, math.pi / 2, alpha=5.0)
