import numpy as np
import pytest

from ppdgd import (
    BoxSet,
    PiecewiseScalarFn,
    QuadraticSmoothFn,
    build_problem,
)
from ppdgd.casestudy import build_case, regulation_cost


@pytest.fixture(scope="session")
def case_problem():
    return build_case()


@pytest.fixture
def kinked_cost():
    """The case-study regulation cost: 0.5 s^2 inside |s| <= 0.2, s^2 - 0.02 outside."""
    return regulation_cost()


@pytest.fixture
def one_dim_problem():
    """f = 0.5 x^2, h = 0.5 y^2, A = B = [1], C = 0, Omega = [-1, 1]; saddle at 0."""
    return build_problem(
        QuadraticSmoothFn(np.array([[1.0]]), np.zeros(1)),
        [PiecewiseScalarFn.quadratic(0.5)],
        np.array([[1.0]]),
        np.array([[1.0]]),
        np.zeros(1),
        BoxSet.free(1),
        BoxSet.box([-1.0], [1.0]),
    )


@pytest.fixture
def identity_problem():
    """f = 0.5||x||^2, h_j = 0.5 s^2, A = I2, B = -I2, C = 0, Omega = [-1,1]^2."""
    return build_problem(
        QuadraticSmoothFn(np.eye(2), np.zeros(2)),
        [PiecewiseScalarFn.quadratic(0.5), PiecewiseScalarFn.quadratic(0.5)],
        np.eye(2),
        -np.eye(2),
        np.zeros(2),
        BoxSet.free(2),
        BoxSet.box([-1.0, -1.0], [1.0, 1.0]),
    )
