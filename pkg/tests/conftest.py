"""Shared fixtures: small grids and canned fields used across the suite."""
import numpy as np
import pytest

from axiswirl.fields import AxisymField, make_grid
from axiswirl.initial import DataSpec, generate


@pytest.fixture
def grid16():
    return make_grid(16, 16, 2.0, -1.0, 1.0)


@pytest.fixture
def grid32():
    return make_grid(32, 32, 4.0, -4.0, 4.0)


@pytest.fixture
def ring_field(grid32):
    return generate(DataSpec(kind="vortex_ring_swirl", n0=1.0), grid32)


def rigid_rotation(grid, omega=0.7):
    fld = AxisymField.zeros(grid)
    fld.vtheta = omega * grid.r[:, None] * np.ones(grid.shape)
    return fld
