import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from factorclt.dgp import PanelData  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_panel(rng):
    def make(n=5, t=8, gamma=None):
        e = rng.standard_normal((n, t))
        v = rng.standard_normal(t)
        g = rng.standard_normal(n) if gamma == "random" else gamma
        return PanelData(e=e, v=v, gamma=g)
    return make


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
