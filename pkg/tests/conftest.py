import sys

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def unit_circle():
    from dislocflow.curves import circle
    return circle(1.0, 64)


@pytest.fixture(scope="session")
def ellipse_curve():
    from dislocflow.curves import ellipse
    return ellipse(2.0, 1.0, 128)


def random_smooth_field(n, seed, modes=4):
    """Smooth periodic 3-vector field sampled at n uniform parameters."""
    rng = np.random.default_rng(seed)
    t = 2 * np.pi * np.arange(n) / n
    out = np.zeros((n, 3))
    for k in range(1, modes + 1):
        a, b = rng.normal(size=(2, 3)) / k ** 2
        out += np.outer(np.cos(k * t), a) + np.outer(np.sin(k * t), b)
    return out


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.VERDICTS:
        terminalreporter.section("acceptance")
        for line in module.VERDICTS:
            terminalreporter.write_line(line)
