import math
from pathlib import Path

import numpy as np
import pytest

from tspmcts.instances import Instance, Metric, distance_matrix, nearest_neighbor_ranks

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def eil51_text() -> str:
    return (DATA_DIR / "eil51.tsp").read_text()


@pytest.fixture(scope="session")
def eil51_tour_text() -> str:
    return (DATA_DIR / "eil51.opt.tour").read_text()


@pytest.fixture
def unit_square() -> Instance:
    return Instance(id="square", points=np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]))


def circle_instance(n: int) -> Instance:
    """n equally spaced points on a circle inside the unit square."""
    angles = 2 * math.pi * np.arange(n) / n
    pts = 0.5 + 0.4 * np.column_stack([np.cos(angles), np.sin(angles)])
    return Instance(id=f"circle-{n}", points=pts)


def dm_and_ranks(inst: Instance, metric: Metric = Metric.EUC2D_REAL):
    dm = distance_matrix(inst, metric)
    return dm, nearest_neighbor_ranks(dm)
