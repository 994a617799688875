import random
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from qctree.arc import QuasiArc  # noqa: E402
from qctree.dyadic import generate  # noqa: E402

settings.register_profile(
    "qctree", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("qctree")

DATA = Path(__file__).resolve().parent.parent / "data"
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def snowflake():
    return QuasiArc(generate("snowflake", 6))


@pytest.fixture(scope="session")
def euclid():
    return QuasiArc(generate("euclidean", 4))


@pytest.fixture(scope="session")
def euclid_plain():
    return QuasiArc(generate("euclidean", 4, normalized=False))


@pytest.fixture(scope="session")
def arc_corpus():
    """Ten arcs of mixed kinds with K <= 6."""
    arcs = [QuasiArc(generate("snowflake", 6)), QuasiArc(generate("euclidean", 5))]
    for s in range(8):
        arcs.append(QuasiArc(generate("random", 3 + s % 4, seed=100 + s)))
    return arcs


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
