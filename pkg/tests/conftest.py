import numpy as np
import pytest

from microsense.chemfield import GridSpec, ScalarField, solve_source_field
from microsense.params import default_params


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def field(params):
    """Source field solved once on the default grid."""
    return solve_source_field(params)


@pytest.fixture
def uniform_field():
    """Builds a field holding one value on every node of the default grid."""

    def build(value: float, p) -> ScalarField:
        g = GridSpec.from_params(p)
        nr, nx = g.shape(p)
        r_nodes = np.concatenate(([0.0], (np.arange(nr) + 0.5) * g.dr, [p.vessel_radius]))
        x_nodes = np.concatenate(([g.x_min], g.x_min + (np.arange(nx) + 0.5) * g.dx, [g.x_max]))
        return ScalarField(g, r_nodes, x_nodes, np.full((nr + 2, nx + 2), value))

    return build
