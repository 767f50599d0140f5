from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from reconroute import (
    SolverConfig,
    TurnModel,
    build_graph,
    load_assets,
    load_block_groups,
    load_road_network,
)

DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def grid_network():
    return load_road_network(DATA.joinpath("grid_network.geojson").read_bytes())


@pytest.fixture(scope="session")
def spur_network():
    return load_road_network(DATA.joinpath("spur_network.geojson").read_bytes())


@pytest.fixture(scope="session")
def grid_assets():
    return load_assets(DATA.joinpath("grid_assets.csv").read_bytes(), fmt="csv")


@pytest.fixture(scope="session")
def grid_groups():
    return load_block_groups(DATA.joinpath("grid_blockgroups.geojson").read_bytes())


@pytest.fixture(scope="session")
def default_config():
    return SolverConfig()


@pytest.fixture(scope="session")
def turn_model(default_config):
    return TurnModel(default_config.u_turn_penalty_s)


@pytest.fixture(scope="session")
def grid_graph(grid_network, default_config):
    return build_graph(grid_network, default_config)


@pytest.fixture(scope="session")
def spur_graph(spur_network, default_config):
    return build_graph(spur_network, default_config)
