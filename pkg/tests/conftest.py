import numpy as np
import pytest
from hypothesis import settings

from fixture_sdp.fe_model import FrameSpec
from fixture_sdp.instances import make_instance, small_instance

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def tiny_spec():
    return FrameSpec(n_rings=5, n_stringers=4, length=3.0)


@pytest.fixture(scope="session")
def tiny(tiny_spec):
    """5x4 half-cylinder, 6 potential nodes, n_a = 2."""
    return make_instance(tiny_spec, (5, 6, 9, 10, 13, 14), 2)


@pytest.fixture(scope="session")
def tiny_problem(tiny):
    return tiny.problem()


@pytest.fixture(scope="session")
def small8():
    """Seeded small surrogate with N_PT = 8, n_a = 2."""
    return small_instance(7, 8, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
