import os

import numpy as np
import pytest

from smforge.explicit import RegionOfInterest
from smforge.models import CoarseModel, FilterGeometry
from smforge.response import make_grid

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
REFERENCE_CONFIG = os.path.join(ROOT, "configs", "paper_case.json")
AFFINE_CONFIG = os.path.join(ROOT, "configs", "affine_case.json")

X0 = np.array([0.161, 2.8517, 0.54, 2.7737, 0.73, 2.7579])
REGION_LO = np.array([0.1288, 2.7661, 0.4320, 2.6904, 0.5840, 2.6751])
REGION_HI = np.array([0.1932, 2.9372, 0.6480, 2.8569, 0.8759, 2.8406])


@pytest.fixture(scope="session")
def grid():
    return make_grid(8.0, 12.0, 0.25)


@pytest.fixture(scope="session")
def geom():
    return FilterGeometry()


@pytest.fixture
def coarse(geom, grid):
    return CoarseModel(geom, grid)


@pytest.fixture(scope="session")
def region():
    return RegionOfInterest(REGION_LO, REGION_HI)


# one line per acceptance criterion, shown after the test summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
