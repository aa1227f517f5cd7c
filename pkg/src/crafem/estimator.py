"""Residual a posteriori indicators for the mixed P1 scheme.

For continuous P1 fields the elementwise Laplacians vanish, so

    eta_psi,T^2 = a_T^2 ||f - psi_h||_T^2 + 1/2 sum_E a_E^2 ||[eps^2 dpsi_h/dn]||_E^2
    eta_u,T^2   = h_T^2 ||psi_h||_T^2     + 1/2 sum_E h_E   ||[du_h/dn]||_E^2

with a_T = min(h_T/eps, 1), a_E = eps^(-1/2) min(h_T/eps, 1), sums over the
interior edges of T, and h_T taken from the element the edge term is added to.
"""
from dataclasses import dataclass

import numpy as np

from .quadrature import physical_points, triangle_rule

INDICATOR_RULE_DEGREE = 6


@dataclass
class IndicatorField:
    eta_psi: np.ndarray
    eta_u: np.ndarray

    @property
    def eta_psi_global(self):
        return float(np.sqrt(np.sum(self.eta_psi ** 2)))

    @property
    def eta_u_global(self):
        return float(np.sqrt(np.sum(self.eta_u ** 2)))

    @property
    def eta_total_global(self):
        return float(np.hypot(self.eta_psi_global, self.eta_u_global))

    def marking_weights(self, mode):
        """Squared indicators used for marking in ``psi`` or ``psi_u`` mode."""
        if mode in ("psi", "psi_only"):
            return self.eta_psi ** 2
        if mode in ("psi_u", "psi_plus_u"):
            return self.eta_psi ** 2 + self.eta_u ** 2
        raise ValueError(f"unknown indicator mode {mode!r}")


def weight_alpha_T(h_T, epsilon):
    h_T = np.asarray(h_T, dtype=float)
    if np.any(h_T <= 0) or not epsilon > 0:
        raise ValueError("h_T and epsilon must be positive")
    return np.minimum(h_T / epsilon, 1.0)


def weight_alpha_E(h_T, epsilon):
    return weight_alpha_T(h_T, epsilon) / np.sqrt(epsilon)


def normal_jumps(space, coeffs):
    """Jumps of the normal derivative of a P1 function across interior edges.

    Returns ``(edge_ids, jumps)``; the sign follows an arbitrary edge
    orientation, only squared values are meaningful.
    """
    mesh = space.mesh
    ids = mesh.interior_edges
    t1, t2 = mesh.edge_triangles[ids].T
    grads = space.cell_gradient(coeffs)
    ab = mesh.vertices[mesh.edges[ids]]
    d = ab[:, 1] - ab[:, 0]
    n = np.stack([d[:, 1], -d[:, 0]], axis=1) / np.linalg.norm(d, axis=1)[:, None]
    return ids, np.einsum("ed,ed->e", grads[t1] - grads[t2], n)


def _edge_sums(mesh, ids, per_edge_for_t1, per_edge_for_t2):
    t1, t2 = mesh.edge_triangles[ids].T
    out = np.bincount(t1, weights=per_edge_for_t1, minlength=mesh.n_triangles)
    out += np.bincount(t2, weights=per_edge_for_t2, minlength=mesh.n_triangles)
    return out


def estimate(space, sol, f):
    mesh = space.mesh
    if len(sol.psi) != space.n_dofs or len(sol.u) != space.n_dofs:
        raise ValueError("solution does not match the space")
    eps = sol.epsilon
    h = mesh.h
    rule = triangle_rule(INDICATOR_RULE_DEGREE)
    pts, wts = physical_points(mesh, rule)
    psi_q = sol.psi[mesh.triangles] @ rule.points.T
    fv = np.broadcast_to(np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float), wts.shape)
    vol_psi = np.sum(wts * (fv - psi_q) ** 2, axis=1)
    vol_u = np.sum(wts * psi_q ** 2, axis=1)

    ids, jpsi = normal_jumps(space, sol.psi)
    _, ju = normal_jumps(space, sol.u)
    h_e = np.linalg.norm(np.diff(mesh.vertices[mesh.edges[ids]], axis=1)[:, 0], axis=1)
    t1, t2 = mesh.edge_triangles[ids].T
    jump_psi_sq = (eps ** 2 * jpsi) ** 2 * h_e
    edge_psi = _edge_sums(mesh, ids,
                          0.5 * weight_alpha_E(h[t1], eps) ** 2 * jump_psi_sq,
                          0.5 * weight_alpha_E(h[t2], eps) ** 2 * jump_psi_sq)
    edge_u_val = 0.5 * h_e * ju ** 2 * h_e
    edge_u = _edge_sums(mesh, ids, edge_u_val, edge_u_val)

    eta_psi = np.sqrt(weight_alpha_T(h, eps) ** 2 * vol_psi + edge_psi)
    eta_u = np.sqrt(h ** 2 * vol_u + edge_u)
    return IndicatorField(eta_psi, eta_u)
