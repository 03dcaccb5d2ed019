import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("navbench", deadline=None, max_examples=60)
settings.load_profile("navbench")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES, ACCEPTANCE_NOTES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
        for line in ACCEPTANCE_NOTES:
            terminalreporter.write_line(line)
