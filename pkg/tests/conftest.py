import sys
import warnings

import numpy as np
import pytest
from hypothesis import settings

from hodovort import maps

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_numpy():
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.fixture(scope="session")
def cubic():
    return maps.cubic()


@pytest.fixture(scope="session")
def gaussian_pieces():
    return maps.gaussian_branches()


@pytest.fixture(scope="session")
def gaussian_catastrophe(gaussian_pieces):
    from hodovort.surface import find_catastrophe

    return find_catastrophe(gaussian_pieces)


@pytest.fixture(scope="session")
def cubic_catastrophe(cubic):
    from hodovort.surface import find_catastrophe

    return find_catastrophe(cubic)



def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
