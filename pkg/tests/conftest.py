"""Shared fixtures: law/table construction is expensive, so it is session-scoped."""
import numpy as np
import pytest

from stableheat import geometry, kato
from stableheat.stable_core import make_law


@pytest.fixture(scope="session")
def law():
    return make_law(1.5, 2)


@pytest.fixture(scope="session")
def law3d():
    return make_law(1.7, 3, nodes=2048)


@pytest.fixture(scope="session")
def unit_ball():
    return geometry.ball(1.0)


@pytest.fixture(scope="session")
def zero_drift():
    return kato.parse_drift("zero", 2)


@pytest.fixture(scope="session")
def bump_drift():
    return kato.parse_drift("bump:0,0;0.3;0.5", 2)


@pytest.fixture(scope="session")
def const_drift():
    return kato.parse_drift("const:0.3,0", 2)
