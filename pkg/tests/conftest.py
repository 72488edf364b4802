import logging
import sys

import numpy as np
import pytest
from hypothesis import settings

from switchnav import load_scenario

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# the shipped scenario runs fewer consensus rounds than certified; silence that warning in tests
logging.getLogger("switchnav.scenario").setLevel(logging.ERROR)

T = 0.01
A_DI = np.array([[1, T, 0, 0], [0, 1, 0, 0], [0, 0, 1, T], [0, 0, 0, 1]], dtype=float)
B_DI = np.array([[0, 0], [T, 0], [0, 0], [0, T]], dtype=float)
X1 = np.array([100.0, -0.1, 20.0, -0.06])


@pytest.fixture(scope="session")
def default_scenario():
    return load_scenario("default")


@pytest.fixture(scope="session")
def demo_scenario():
    return load_scenario("demo")


def random_schur(rng, n, radius=0.9):
    F = rng.normal(size=(n, n))
    rho = max(abs(np.linalg.eigvals(F)))
    return F * (radius * rng.uniform(0.1, 1.0) / rho)


def ring_vertices(vs):
    return {str(v): [vs[(k + 1) % len(vs)], vs[(k - 1) % len(vs)]] for k, v in enumerate(vs)}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
