import numpy as np
import pytest

from divmeasure.grid import GridSpec
from divmeasure.shapes import AxisBox, Ball
from divmeasure.traces import ApproximationFamily, TraceSchedule


@pytest.fixture(scope="session")
def coarse_grid():
    return GridSpec.from_bounds([-2.0, -2.0], [2.0, 2.0], 1 / 64)


@pytest.fixture(scope="session")
def reference_grid():
    return GridSpec.from_bounds([-2.0, -2.0], [2.0, 2.0], 1 / 256)


@pytest.fixture(scope="session")
def coarse_schedule():
    return TraceSchedule([0.4, 0.2, 0.1])


@pytest.fixture(scope="session")
def reference_schedule():
    return TraceSchedule([0.2, 0.1, 0.05])


@pytest.fixture(scope="session")
def disk():
    return Ball([0.0, 0.0], 1.0)


@pytest.fixture(scope="session")
def square():
    return AxisBox([0.0, 0.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def disk_family(disk, reference_grid, reference_schedule):
    """Mollified indicators of the unit disk, shared by the trace tests."""
    return ApproximationFamily(disk, reference_grid, reference_schedule.eps_list)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
