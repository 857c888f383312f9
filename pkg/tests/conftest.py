"""Shared fixtures.

Session-scoped fixtures hold the expensive forward/inverse computations
used by several test modules; the acceptance suite times its own runs
and does not rely on these.
"""

import numpy as np
import pytest

from msturm.core import BoundaryCoefficient, PotentialGrid, Problem, Projector
from msturm import forward, graph
from msturm.reconstruct import sec6_spectral_data, solve_inverse


@pytest.fixture(scope="session")
def star_model():
    """Zero-potential star problem, m = 3, grid 1000."""
    return Problem(
        PotentialGrid.zeros(3, 1000), Projector.star(3), BoundaryCoefficient.zero(3)
    )


@pytest.fixture(scope="session")
def sec6_data():
    return sec6_spectral_data(0.3, 15)


@pytest.fixture(scope="session")
def sec6_result(sec6_data):
    return solve_inverse(sec6_data)


@pytest.fixture(scope="session")
def m2_problem():
    """Two decoupled channels: q1 = 0.5 sin x, q2 = 0; T = diag(1, 0)."""
    pot = PotentialGrid.diagonal([lambda x: 0.5 * np.sin(x), lambda x: 0.0], 600)
    return Problem(pot, Projector(np.diag([1.0, 0.0]), 1), BoundaryCoefficient.zero(2))


@pytest.fixture(scope="session")
def m2_data(m2_problem):
    return forward.spectral_data(m2_problem, 12)


@pytest.fixture(scope="session")
def star_problem():
    """Star graph with one bumped edge, m = 3."""
    return graph.StarGraphProblem.from_callables(
        [lambda x: 0.3 * np.sin(x), lambda x: 0.0, lambda x: 0.0], 600
    )


@pytest.fixture(scope="session")
def star_data(star_problem):
    return forward.spectral_data(graph.graph_to_matrix(star_problem), 10)
