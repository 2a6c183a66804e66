import numpy as np
import pytest
from hypothesis import settings

from afdc import geometry

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def naca2412():
    return geometry.naca4("2412")


def flat_plate(n=5, name="plate"):
    """Zero-thickness Selig loop along y = 0 from x = 1 to 0 and back."""
    xs = np.linspace(1.0, 0.0, n)
    pts = np.concatenate([np.c_[xs, np.zeros(n)], np.c_[xs[::-1][1:], np.zeros(n - 1)]])
    return geometry.AirfoilGeometry(name, pts)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
