import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from polarlr.channel_model import random_symmetric

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def symmetric_dists(draw):
    return random_symmetric(np.random.default_rng(draw(seeds)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
