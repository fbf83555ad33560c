import sys
import numpy as np
import pytest

from steinerpf import build_disc_mesh


@pytest.fixture(scope="session")
def disc():
    return build_disc_mesh((0.0, 0.0), 1.0, 0.08)


@pytest.fixture(scope="session")
def fine_disc():
    return build_disc_mesh((0.5, 0.0), 1.6, 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
