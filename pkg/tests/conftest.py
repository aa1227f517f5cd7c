import numpy as np
import pytest

from crafem.mesh import refine, unit_square_initial


def uniform(levels, mesh=None):
    """``levels`` rounds of bisecting every triangle."""
    mesh = unit_square_initial() if mesh is None else mesh
    for _ in range(levels):
        mesh = refine(mesh, range(mesh.n_triangles))
    return mesh


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
