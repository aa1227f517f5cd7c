"""Stiffness, mass and load assembly for P1 elements."""
import numpy as np

from .quadrature import DEFAULT_TRIANGLE_DEGREE, physical_points, triangle_rule
from .sparse import CsrMatrix, bmat, restrict

# exact P1 element mass matrix divided by |T|
_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def local_stiffness(space):
    """(m, 3, 3) element stiffness matrices."""
    g = space.gradients
    return space.mesh.areas[:, None, None] * np.einsum("mid,mjd->mij", g, g)


def local_mass(space):
    return space.mesh.areas[:, None, None] * _MASS_REF[None]


def _assemble(space, local):
    tri = space.mesh.triangles
    rows = np.repeat(tri, 3, axis=1)
    cols = np.tile(tri, (1, 3))
    n = space.n_dofs
    return CsrMatrix.from_triplets(n, n, rows.ravel(), cols.ravel(), local.reshape(len(tri), 9).ravel())


def assemble_operator(space, kind):
    """Global ``stiffness`` or ``mass`` matrix over all DOFs."""
    if kind == "stiffness":
        return _assemble(space, local_stiffness(space))
    if kind == "mass":
        return _assemble(space, local_mass(space))
    raise ValueError(f"unknown operator kind {kind!r}")


def assemble_load(space, f, degree=DEFAULT_TRIANGLE_DEGREE):
    """Load vector b_i = integral of f * phi_i."""
    rule = triangle_rule(degree)
    pts, wts = physical_points(space.mesh, rule)
    fv = np.broadcast_to(np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float), wts.shape)
    local = np.einsum("mq,qi->mi", fv * wts, rule.points)
    return np.bincount(space.mesh.triangles.ravel(), weights=local.ravel(), minlength=space.n_dofs)


def assemble_clamped_block(space, epsilon, f, K=None, M=None, b=None):
    """Monolithic system for the clamped problem.

    Unknowns are ``[psi on all DOFs; u on interior DOFs]``.  The first block
    row is the psi-equation tested with interior hats, the second the
    u-equation tested with every hat.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    K = assemble_operator(space, "stiffness") if K is None else K
    M = assemble_operator(space, "mass") if M is None else M
    b = assemble_load(space, f) if b is None else b
    interior = space.interior_dofs
    alldofs = np.arange(space.n_dofs)
    A = K.scale(epsilon ** 2).add(M)
    top = restrict(A, interior, alldofs)
    lower_u = restrict(K, alldofs, interior)
    matrix = bmat([[top, None], [M.scale(-1.0), lower_u]])
    rhs = np.concatenate([b[interior], np.zeros(space.n_dofs)])
    return matrix, rhs
