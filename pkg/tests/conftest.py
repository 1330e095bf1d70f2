"""Pytest fixtures shared by the psmflow tests.

Fixtures build small lattices, procedural meshes and output directories.
Environment overrides are set before psmflow is imported so that the module
level ``settings`` object sees them.
"""

import os

os.environ.setdefault("PSMFLOW_LOG_EVERY", "1000000")
os.environ.setdefault("PSMFLOW_OUTPUT_DIR", "")

import numpy as np
import pytest

from psmflow.config import settings
from psmflow.models.domain import Domain
from psmflow.models.fields import allocate_cells
from psmflow.models.stencil import D2Q9, D3Q19, Stencil
from psmflow.services.lattice import equilibrium
from psmflow.services.primitives import cube, icosphere


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test run sees the same numbers."""
    return np.random.default_rng(20240611)


@pytest.fixture(params=["D2Q9", "D3Q19"])
def stencil(request) -> Stencil:
    """Both supported stencils."""
    return D2Q9 if request.param == "D2Q9" else D3Q19


@pytest.fixture
def d3q19() -> Stencil:
    return D3Q19


@pytest.fixture
def d2q9() -> Stencil:
    return D2Q9


def random_state(
    stencil: Stencil, dims: tuple[int, int, int], rng: np.random.Generator, speed: float = 0.05
) -> np.ndarray:
    """Positive PDFs near equilibrium of a random low-Mach flow, shape (q, nx, ny, nz)."""
    rho = allocate_cells(dims)
    rho[...] = 1.0 + 0.05 * rng.uniform(-1.0, 1.0, size=dims)
    u = allocate_cells(dims, (3,))
    for a in range(stencil.dim):
        u[a] = speed * rng.uniform(-1.0, 1.0, size=dims)
    feq = equilibrium(u, rho, stencil)
    noise = allocate_cells(dims, (stencil.q,))
    noise[...] = 1.0 + 0.01 * rng.uniform(-1.0, 1.0, size=(stencil.q, *dims))
    return feq * noise


@pytest.fixture
def periodic_domain() -> Domain:
    """Fully periodic 3D box in lattice-like units (dx = dt = 1, tau = 0.8)."""
    return Domain(dims=(12, 10, 8), dx=1.0, dt=1.0, rho_f=1.0, nu=0.1)


@pytest.fixture
def unit_cube():
    return cube(1.0)


@pytest.fixture
def sphere_mesh():
    return icosphere(0.5, subdivisions=3)


@pytest.fixture
def output_dir(tmp_path):
    """Empty directory for artifacts."""
    path = tmp_path / "output"
    path.mkdir()
    return path


@pytest.fixture
def override_settings(monkeypatch):
    """Patch attributes of the process settings for one test.

    Example:
        override_settings(STRICT_MESH=False)
    """

    def apply(**values):
        for key, value in values.items():
            monkeypatch.setattr(settings, key, value)
        return settings

    return apply
