"""Continuous piecewise-linear Lagrange spaces on a TriMesh."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=False)
class FeSpace:
    """P1 space with vertex DOFs; ``interior_dofs`` spans the zero-trace subspace."""

    mesh: object
    degree: int = 1

    @property
    def n_dofs(self):
        return self.mesh.n_vertices

    @property
    def dof_coords(self):
        return self.mesh.vertices

    @cached_property
    def boundary_dofs(self):
        return np.flatnonzero(self.mesh.boundary_vertex_flags)

    @cached_property
    def interior_dofs(self):
        return np.flatnonzero(~self.mesh.boundary_vertex_flags)

    @property
    def cell_dofs(self):
        return self.mesh.triangles

    @cached_property
    def gradients(self):
        """(m, 3, 2) constant gradients of the three hat functions per triangle."""
        return barycentric_gradients(self.mesh.vertices[self.mesh.triangles])

    def interpolate(self, g):
        """Nodal interpolant of a callable g(x, y)."""
        x = self.dof_coords
        return np.asarray(g(x[:, 0], x[:, 1]), dtype=float) * np.ones(self.n_dofs)

    def cell_gradient(self, coeffs):
        """(m, 2) gradient of the P1 function with nodal values ``coeffs``."""
        return np.einsum("mi,mid->md", coeffs[self.mesh.triangles], self.gradients)

    def evaluate(self, coeffs, tri, bary):
        """Values at barycentric points ``bary`` (..., 3) in triangles ``tri``."""
        return np.einsum("...i,...i->...", coeffs[self.mesh.triangles[tri]], bary)


def build_space(mesh, k=1):
    if k != 1:
        raise NotImplementedError("only P1 (k = 1) is implemented")
    return FeSpace(mesh, 1)


def barycentric_gradients(p):
    """Gradients of barycentric coordinates for triangles ``p`` of shape (m, 3, 2)."""
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    g = np.empty(p.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = (y[:, j] - y[:, k]) / det
        g[:, i, 1] = (x[:, k] - x[:, j]) / det
    return g


def eval_basis(space, triangle):
    """Local P1 basis on one triangle.

    Returns ``(grads, values)`` where ``grads`` is (3, 2) and ``values(x, y)``
    gives the three barycentric coordinates at a point.
    """
    p = space.mesh.vertices[space.mesh.triangles[triangle]]
    grads = barycentric_gradients(p[None])[0]

    def values(x, y):
        d = np.array([x, y]) - p[0]
        lam12 = grads[1:] @ d
        return np.array([1.0 - lam12.sum(), lam12[0], lam12[1]])

    return grads, values
