# fsforge/tests/conftest.py
import json
from pathlib import Path

import numpy as np
import pytest

from core.config import Settings
from flow.service import FlowService
from landscape.models import HolomorphicFunction

FIXTURES = Path(__file__).parent / "fixtures"

CUBIC = HolomorphicFunction.from_coefficients([0, -1, 0, 1 / 3])
QUARTIC = HolomorphicFunction.from_coefficients([0, -1, 0, 0, 0.25])
QUADRATIC = HolomorphicFunction.from_coefficients([0, 0, 0.5])


@pytest.fixture
def settings() -> Settings:
    return Settings()


@pytest.fixture
def cubic() -> HolomorphicFunction:
    return CUBIC


@pytest.fixture
def quartic() -> HolomorphicFunction:
    return QUARTIC


@pytest.fixture
def quadratic() -> HolomorphicFunction:
    return QUADRATIC


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def oracles() -> dict:
    return json.loads((FIXTURES / "oracles.json").read_text())


@pytest.fixture(scope="session")
def cubic_connection():
    """The single flowline of z^3/3 - z from x = -1 (index 0) to x = +1 (index 1)."""
    return FlowService(Settings()).find_connections(CUBIC, 0, 1)


@pytest.fixture(scope="session")
def cubic_flowline(cubic_connection):
    return cubic_connection.flowlines[0]


@pytest.fixture(scope="session")
def quartic_connections():
    """Connections of z^4/4 - z between every ordered pair of its three critical points."""
    flow = FlowService(Settings())
    return {(x, y): flow.find_connections(QUARTIC, x, y) for x in range(3) for y in range(3) if x != y}
