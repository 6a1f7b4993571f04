from importlib import resources

import numpy as np
import pytest

from pufpolar.decoder import make_decoder
from pufpolar.polar import CodeSpec, load_code

DATA = resources.files("pufpolar") / "data"


@pytest.fixture(scope="session")
def code1024() -> CodeSpec:
    return load_code(DATA / "code_1024_78.json")


@pytest.fixture(scope="session")
def code64() -> CodeSpec:
    return load_code(DATA / "code_64_17.json")


@pytest.fixture(scope="session")
def code16() -> CodeSpec:
    # small code with a nontrivial BDL profile; K = 5
    return CodeSpec.from_generators(4, [7, 11], (2, 2))


@pytest.fixture(scope="session")
def tree3(code1024):
    return make_decoder(code1024, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
