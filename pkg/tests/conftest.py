"""Shared fixtures: default parameter tables and small hand-placed scenarios."""
import os

import pytest

from entities import ChannelParams, EnergyParams
from scenario_loader import build_scenario

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def channel_params():
    return ChannelParams()


@pytest.fixture
def energy_params():
    return EnergyParams()


@pytest.fixture
def make_scenario():
    """Scenario from explicit (x, y, z) positions in the default 500x500x200 box."""
    def _make(positions, seed=0, **overrides):
        return build_scenario(positions, seed=seed, **overrides)
    return _make


@pytest.fixture
def relay_scenario(make_scenario):
    """
    One shallow node under the USV (radio link, alone in its family) and
    twelve deep acoustic nodes in two groups; the acoustic nodes interfere
    with each other below the SINR gate, so only node 0 reaches the USV.
    """
    positions = [(250.0, 250.0, -5.0)]
    for cx, cy in ((150.0, 150.0), (350.0, 350.0)):
        for dx, dy in ((0, 0), (4, 0), (0, 4), (4, 4), (8, 2), (2, 8)):
            positions.append((cx + dx, cy + dy, -120.0))
    return make_scenario(positions, seed=11)
