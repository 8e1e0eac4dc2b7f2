"""
Shared fixtures for the oldroyd-fem tests
"""

import numpy as np
import pytest

from oldroyd_fem.mesh import build_structured_mesh
from oldroyd_fem.models import FluidParams, RegParams, SolverOpts


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square_mesh():
    """4x4 right-triangle mesh of the unit square"""
    return build_structured_mesh(4, 4)


@pytest.fixture
def coarse_mesh():
    return build_structured_mesh(2, 2)


@pytest.fixture
def fluid():
    return FluidParams(reynolds=1.0, weissenberg=1.0, viscosity_fraction=0.5, diffusion=0.0)


@pytest.fixture
def diffusive_fluid():
    return FluidParams(reynolds=1.0, weissenberg=1.0, viscosity_fraction=0.5, diffusion=0.01)


@pytest.fixture
def reg():
    return RegParams(delta=0.5)


@pytest.fixture
def opts():
    return SolverOpts(tol=1e-10, max_iter=100)


@pytest.fixture
def write_config(tmp_path):
    """Write a flat YAML configuration and return its path"""

    def write(text: str, name: str = "run.yaml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
