import numpy as np
import pytest

from mvlift import MeasureField, TargetGrid, build_interval, full_mask


@pytest.fixture
def unit_grid8():
    return TargetGrid(q=1, cells=(8,), mins=(0.0,), maxs=(1.0,), periodic=(False,))


@pytest.fixture
def interval8():
    return build_interval(8, 1.0)


def random_rows(rng, n, m, floor=0.0):
    """Strictly positive random probability rows when floor > 0."""
    rows = rng.dirichlet(np.ones(m), size=n)
    if floor:
        rows = (1.0 - floor) * rows + floor / m
    return rows / rows.sum(axis=1, keepdims=True)


def measure_from_rows(grid, rows):
    return MeasureField(grid=grid, rho=np.asarray(rows, dtype=float))
