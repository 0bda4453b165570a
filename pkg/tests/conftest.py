import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from degengl.grid import Field, Grid  # noqa: E402
from degengl.potential import EnergyParams, model_potential  # noqa: E402


@pytest.fixture
def params24() -> EnergyParams:
    return EnergyParams(n=2, p=2.0, m=4.0)


@pytest.fixture
def model4():
    return model_potential(4.0)


@pytest.fixture
def half_plane() -> Field:
    """tanh(x) on a 70 x 70 box with h = 0.25: a planar interface through the origin."""
    grid = Grid.box(2, 70.0, 0.25)
    x = grid.axis_coords(0)[:, None]
    return Field(grid, np.broadcast_to(np.tanh(x), grid.shape).copy())
