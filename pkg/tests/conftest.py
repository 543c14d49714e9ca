from __future__ import annotations

import pytest

from perfsim.core import BaseDistribution, CostFunction, default_theta_grid
from perfsim.response import ResponseModel


@pytest.fixture(scope="session")
def base():
    return BaseDistribution.symmetric_mixture()


@pytest.fixture(scope="session")
def cost():
    return CostFunction.linear(1.0, 1.0)


@pytest.fixture(scope="session")
def grid():
    return default_theta_grid()


@pytest.fixture(scope="session")
def standard(cost):
    return ResponseModel.standard(cost)

