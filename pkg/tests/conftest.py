import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from collision_asymptotics.potential import AngularCoefficient

settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def cyl5():
    """alpha/|x_J|^2 with N=5, k=3, alpha=3/16: mu_1 = -11/16, gamma' = -1/4."""
    return AngularCoefficient.cylindrical(5, 3, 3 / 16)


@pytest.fixture(scope="session")
def pair6():
    return AngularCoefficient.pair(6, 3, 0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def unit_vectors(rng, n, N):
    x = rng.standard_normal((n, N))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
