import numpy as np
import pytest

from panoexplore import world as W
from panoexplore.patterns import pattern_corpus


@pytest.fixture(scope="session")
def default_scene():
    return W.generate_scene(7)


@pytest.fixture(scope="session")
def empty_scene():
    return W.Scene(seed=0)


@pytest.fixture(scope="session")
def small_corpus():
    return pattern_corpus(256, 128)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


#: acceptance criterion results, printed in the terminal summary
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
