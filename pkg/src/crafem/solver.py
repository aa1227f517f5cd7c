"""Ciarlet-Raviart mixed P1 discretisations for eps^2 Lap^2 u - Lap u = f.

With psi = -Lap u the problem splits into

    -eps^2 Lap psi + psi = f,    -Lap u = psi.

Under Navier conditions (u = Lap u = 0) both fields vanish on the boundary
and the discrete systems decouple.  Under clamped conditions (u = du/dn = 0)
psi carries no boundary condition and the second equation is tested with all
hat functions, which couples the two fields.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .assembly import assemble_clamped_block, assemble_load, assemble_operator
from .linalg import DEFAULT_TOL, SolveReport, SolverError, solve_general, solve_spd
from .sparse import CsrMatrix, restrict

BC_KINDS = ("navier", "clamped")


@dataclass
class MixedSolution:
    psi: np.ndarray
    u: np.ndarray
    epsilon: float
    bc_kind: str
    reports: tuple = ()

    def scaled(self, c):
        return MixedSolution(c * self.psi, c * self.u, self.epsilon, self.bc_kind, self.reports)


def _require(report, what):
    if not report.converged:
        raise SolverError(f"{what} did not converge (relative residual "
                          f"{report.relative_residual:.3e} after {report.iterations} iterations)",
                          report)


def _operators(space, f):
    return (assemble_operator(space, "stiffness"), assemble_operator(space, "mass"),
            assemble_load(space, f))


def solve_navier(space, f, epsilon, tol=DEFAULT_TOL, x0=None):
    """``x0``, if given, is an initial guess ``(psi, u)`` on all DOFs."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    K, M, b = _operators(space, f)
    inner = space.interior_dofs
    n = space.n_dofs
    A = restrict(K.scale(epsilon ** 2).add(M), inner, inner)
    g_psi = g_u = None
    if x0 is not None:
        g_psi, g_u = x0[0][inner], x0[1][inner]
    psi_i, rep1 = solve_spd(A, b[inner], tol, x0=g_psi)
    _require(rep1, "psi system")
    psi = np.zeros(n)
    psi[inner] = psi_i
    rhs = (M @ psi)[inner]
    u_i, rep2 = solve_spd(restrict(K, inner, inner), rhs, tol, x0=g_u)
    _require(rep2, "u system")
    u = np.zeros(n)
    u[inner] = u_i
    return MixedSolution(psi, u, epsilon, "navier", (rep1, rep2))


def clamped_ordering(space):
    """Row and column permutations of the clamped block system for ILU(0).

    In the assembled ``[psi; u_interior]`` layout the diagonal pairs interior
    psi-equations with unrelated unknowns and ILU(0) hits zero pivots.  Here
    nodes are visited in reverse Cuthill-McKee order and each node
    contributes its equations next to its own unknowns: (psi-eq, u-eq) rows
    against (psi, u) columns at interior nodes, the u-eq row against psi at
    boundary nodes.  The node blocks are lower triangular with positive
    diagonal.
    """
    mesh = space.mesh
    n = space.n_dofs
    tri = mesh.triangles
    graph = sp.csr_matrix((np.ones(tri.size * 3), (np.repeat(tri, 3, axis=1).ravel(),
                                                    np.tile(tri, (1, 3)).ravel())), shape=(n, n))
    nodes = np.asarray(reverse_cuthill_mckee(graph, symmetric_mode=True), dtype=np.int64)
    inner = space.interior_dofs
    local = np.full(n, -1, dtype=np.int64)
    local[inner] = np.arange(len(inner))
    n_int = len(inner)
    loc = local[nodes]
    is_int = loc >= 0
    per_node = np.where(is_int, 2, 1)
    start = np.cumsum(per_node) - per_node
    size = n + n_int
    rows = np.empty(size, dtype=np.int64)
    cols = np.empty(size, dtype=np.int64)
    # interior node: (psi-eq, psi) then (u-eq, u); boundary node: (u-eq, psi)
    rows[start] = np.where(is_int, loc, n_int + nodes)
    cols[start] = nodes
    second = start[is_int] + 1
    rows[second] = n_int + nodes[is_int]
    cols[second] = n + loc[is_int]
    return rows, cols


def solve_clamped(space, f, epsilon, tol=DEFAULT_TOL, x0=None):
    """``x0``, if given, is an initial guess ``(psi, u)`` on all DOFs."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    matrix, rhs = assemble_clamped_block(space, epsilon, f)
    rows, cols = clamped_ordering(space)
    permuted = CsrMatrix.from_scipy(matrix.to_scipy()[rows][:, cols])
    n = space.n_dofs
    guess = None
    if x0 is not None:
        guess = np.concatenate([x0[0], x0[1][space.interior_dofs]])[cols]
    y, rep = solve_general(permuted, rhs[rows], tol, x0=guess)
    _require(rep, "clamped block system")
    x = np.empty_like(y)
    x[cols] = y
    u = np.zeros(n)
    u[space.interior_dofs] = x[n:]
    return MixedSolution(x[:n].copy(), u, epsilon, "clamped", (rep,))


def solve(space, f, epsilon, bc_kind, tol=DEFAULT_TOL, x0=None):
    if bc_kind == "navier":
        return solve_navier(space, f, epsilon, tol, x0=x0)
    if bc_kind == "clamped":
        return solve_clamped(space, f, epsilon, tol, x0=x0)
    raise ValueError(f"unknown boundary condition {bc_kind!r}")


def galerkin_residuals(space, sol, f):
    """Relative residuals of the two discrete equations on their test spaces."""
    K, M, b = _operators(space, f)
    inner = space.interior_dofs
    eps2 = sol.epsilon ** 2
    r1 = (eps2 * (K @ sol.psi) + M @ sol.psi - b)[inner]
    tests = inner if sol.bc_kind == "navier" else np.arange(space.n_dofs)
    r2 = (K @ sol.u - M @ sol.psi)[tests]

    def rel(r, ref):
        nr = np.linalg.norm(ref)
        return float(np.linalg.norm(r) / nr) if nr > 0 else float(np.linalg.norm(r))

    return rel(r1, b[inner]), rel(r2, (M @ sol.psi)[tests])
