"""Shared fixtures: small geometries and admissible potential pairs."""
import numpy as np
import pytest

from src.domain.fields import Potential, bump_potential
from src.domain.geometry import GeometrySpec, PatchSpec, build_geometry
from src.forward.helmholtz import clear_operator_cache
from src.spectral.eigen import clear_spectral_cache


def make_geometry(subdivisions: int = 8, dimension: int = 3, inner_side: float = 0.5, **kwargs):
    spec = GeometrySpec(dimension=dimension, subdivisions=subdivisions, inner_side=inner_side, **kwargs)
    return build_geometry(spec)


@pytest.fixture(autouse=True)
def _fresh_caches():
    clear_operator_cache()
    clear_spectral_cache()
    yield
    clear_operator_cache()
    clear_spectral_cache()


@pytest.fixture
def geometry():
    return make_geometry(8)


@pytest.fixture
def full_boundary_geometry():
    return make_geometry(8, gamma=PatchSpec(faces=["all"]), sigma=PatchSpec(faces=["all"]))


@pytest.fixture
def pair(geometry):
    q1 = bump_potential(geometry, 0.5, background=1.0)
    q2 = Potential.constant(geometry, 1.0, kappa=q1.kappa)
    return q1, q2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
