import numpy as np
import pytest

from nnoid.moebius import build_group
from nnoid.monodromy import LambdaGrid, monodromies_downstairs
from nnoid.potentials import build_spec
from nnoid.unitarize import pointwise_unitarizer


@pytest.fixture(scope="session")
def c3_spec():
    return build_spec(build_group("cyclic", 3), (0.0, 0.0, 0.4))


@pytest.fixture(scope="session")
def d3_spec():
    return build_spec(build_group("dihedral", 3), (0.3, 0.3, 0.3))


@pytest.fixture(scope="session")
def grid64():
    return LambdaGrid(64)


@pytest.fixture(scope="session")
def c3_rep(c3_spec, grid64):
    return monodromies_downstairs(c3_spec, grid64)


@pytest.fixture(scope="session")
def d3_rep(d3_spec, grid64):
    return monodromies_downstairs(d3_spec, grid64)


@pytest.fixture(scope="session")
def c3_unitarizer(c3_rep):
    return pointwise_unitarizer(c3_rep)


@pytest.fixture(scope="session")
def d3_unitarizer(d3_rep):
    return pointwise_unitarizer(d3_rep)


@pytest.fixture(scope="session")
def c3_surface(c3_spec, c3_unitarizer):
    from nnoid import surface as S

    dg = S.domain_grid(c3_spec, sphere_points=288, radial=3, angular=24)
    mesh, ff = S.build_mesh(c3_spec, c3_unitarizer, dg)
    return dg, mesh, ff


@pytest.fixture(scope="session")
def d3_surface(d3_spec, d3_unitarizer):
    from nnoid import surface as S

    dg = S.domain_grid(d3_spec, sphere_points=288, radial=3, angular=24)
    mesh, ff = S.build_mesh(d3_spec, d3_unitarizer, dg)
    return dg, mesh, ff


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
