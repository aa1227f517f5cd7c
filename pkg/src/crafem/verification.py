"""Exact solutions, source terms, error norms and effectivity indices."""
from dataclasses import dataclass, field

import numpy as np

from .quadrature import layer_graded_points, physical_points, triangle_rule

ERROR_RULE_DEGREE = 6


@dataclass(frozen=True)
class Layer:
    """Boundary layer of width ``width`` along the line ``normal . x + offset = 0``."""

    normal: tuple
    offset: float
    width: float


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form fields of a problem with known solution.

    ``grad_*`` callables return a pair ``(d/dx, d/dy)``.  ``layers`` tells the
    error quadrature where the fields vary on a short length scale.
    """

    u: callable
    grad_u: callable
    psi: callable
    grad_psi: callable
    f: callable
    epsilon: float
    bc_kind: str
    name: str = "custom"
    layers: tuple = field(default_factory=tuple)


def separable_solution(scale, X, Y, epsilon, bc_kind, name="custom", layers=()):
    """Build u = scale * X(x) * Y(y) from factor derivative tables.

    ``X(x)`` and ``Y(y)`` return the derivatives of orders 0..4 as a tuple.
    For ``f`` the factor ``eps**2 * X''''`` is requested through the optional
    keyword ``eps2`` so that layer terms scaling like 1/eps**2 are formed
    without cancellation.
    """
    e2 = epsilon ** 2

    def u(x, y):
        return scale * X(x)[0] * Y(y)[0]

    def grad_u(x, y):
        xd, yd = X(x), Y(y)
        return scale * xd[1] * yd[0], scale * xd[0] * yd[1]

    def psi(x, y):
        xd, yd = X(x), Y(y)
        return -scale * (xd[2] * yd[0] + xd[0] * yd[2])

    def grad_psi(x, y):
        xd, yd = X(x), Y(y)
        return (-scale * (xd[3] * yd[0] + xd[1] * yd[2]),
                -scale * (xd[2] * yd[1] + xd[0] * yd[3]))

    def f(x, y):
        xd, yd = X(x, eps2=e2), Y(y, eps2=e2)
        bih = xd[4] * yd[0] + 2.0 * e2 * xd[2] * yd[2] + xd[0] * yd[4]
        return scale * bih + psi(x, y)

    return ExactSolution(u, grad_u, psi, grad_psi, f, epsilon, bc_kind, name, tuple(layers))


def _poly_factor(coeffs):
    """Derivative table of a polynomial given by increasing-power ``coeffs``."""
    polys = [np.polynomial.Polynomial(coeffs)]
    for _ in range(4):
        polys.append(polys[-1].deriv())

    def table(x, eps2=None):
        vals = [p(x) for p in polys]
        if eps2 is not None:
            vals[4] = eps2 * vals[4]
        return vals

    return table


_QUARTIC = _poly_factor([0.0, 0.0, 1.0, -2.0, 1.0])  # t^2 (t - 1)^2


def _layer_factor(epsilon):
    """Derivatives of (x^2 + eps^2 (1 - exp(-x/eps))^2) (x - 1)^2."""
    eps = epsilon

    def table(x, eps2=None):
        x = np.asarray(x, dtype=float)
        E = np.exp(-x / eps)
        E2 = E * E
        g0 = x * x + eps * eps * (1.0 - E) ** 2
        g1 = 2.0 * x + 2.0 * eps * (E - E2)
        g2 = 2.0 - 2.0 * E + 4.0 * E2
        g3 = (2.0 * E - 8.0 * E2) / eps
        p0, p1, p2 = (x - 1.0) ** 2, 2.0 * (x - 1.0), 2.0
        a0 = g0 * p0
        a1 = g1 * p0 + g0 * p1
        a2 = g2 * p0 + 2.0 * g1 * p1 + g0 * p2
        a3 = g3 * p0 + 3.0 * g2 * p1 + 3.0 * g1 * p2
        if eps2 is None:
            g4 = (-2.0 * E + 16.0 * E2) / eps ** 2
            a4 = g4 * p0 + 4.0 * g3 * p1 + 6.0 * g2 * p2
        else:
            # eps2 * a4 with the 1/eps^2 and 1/eps factors cancelled analytically
            a4 = ((-2.0 * E + 16.0 * E2) * p0 * (eps2 / eps ** 2)
                  + 4.0 * (2.0 * E - 8.0 * E2) * p1 * (eps2 / eps)
                  + 6.0 * eps2 * g2 * p2)
        return a0, a1, a2, a3, a4

    return table


def example1(epsilon):
    """Clamped plate with a boundary layer at x = 0.

    u = 256 (x^2 + eps^2 (1 - exp(-x/eps))^2) (x - 1)^2 y^2 (y - 1)^2
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return separable_solution(256.0, _layer_factor(epsilon), _QUARTIC, epsilon, "clamped",
                              name="example1", layers=(Layer((1.0, 0.0), 0.0, epsilon),))


def example2_source():
    """Source of the simply supported example; its exact solution is unknown."""

    def f(x, y):
        return 2.0 * np.pi ** 2 * (1.0 - np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y))

    return f


def _sin_factor(x, eps2=None):
    s, c = np.sin(np.pi * x), np.cos(np.pi * x)
    p = np.pi
    d4 = p ** 4 * s
    return s, p * c, -p ** 2 * s, -p ** 3 * c, d4 if eps2 is None else eps2 * d4


def sine_solution(epsilon):
    """u = sin(pi x) sin(pi y); satisfies the Navier conditions."""
    return separable_solution(1.0, _sin_factor, _sin_factor, epsilon, "navier", name="sine")


def plate_polynomial_solution(epsilon, scale=4096.0):
    """u = scale * x^3 (1-x)^3 y^3 (1-y)^3, which meets both sets of conditions."""
    cubic = _poly_factor(np.polynomial.Polynomial.fromroots([0, 0, 0, 1, 1, 1]).coef * -1.0)
    return separable_solution(scale, cubic, cubic, epsilon, "both", name="plate_poly")


# ---------------------------------------------------------------------------
# error norms


def _barycentric(mesh, tri, pts):
    """Barycentric coordinates (..., q, 3) of points (..., q, 2) in triangles ``tri``."""
    p = mesh.vertices[mesh.triangles[tri]]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    w = pts - p[:, None, 0]
    l1 = (w[..., 0] * d2[:, None, 1] - w[..., 1] * d2[:, None, 0]) / det[:, None]
    l2 = (d1[:, None, 0] * w[..., 1] - d1[:, None, 1] * w[..., 0]) / det[:, None]
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def _error_terms(space, sol, exact, tri, pts, wts):
    mesh = space.mesh
    bary = _barycentric(mesh, tri, pts)
    loc = mesh.triangles[tri]
    psi_h = np.einsum("mi,mqi->mq", sol.psi[loc], bary)
    gpsi_h = space.cell_gradient(sol.psi)[tri]
    gu_h = space.cell_gradient(sol.u)[tri]
    x, y = pts[..., 0], pts[..., 1]
    psi = exact.psi(x, y)
    gpx, gpy = exact.grad_psi(x, y)
    gux, guy = exact.grad_u(x, y)
    e2 = exact.epsilon ** 2
    psi_l2 = np.sum(wts * (psi - psi_h) ** 2)
    psi_h1 = np.sum(wts * ((gpx - gpsi_h[:, None, 0]) ** 2 + (gpy - gpsi_h[:, None, 1]) ** 2))
    u_h1 = np.sum(wts * ((gux - gu_h[:, None, 0]) ** 2 + (guy - gu_h[:, None, 1]) ** 2))
    return psi_l2, e2 * psi_h1, u_h1


def _near_layer(mesh, layer, reach):
    p = mesh.vertices[mesh.triangles]
    n = np.asarray(layer.normal, dtype=float)
    n = n / np.linalg.norm(n)
    s = p @ n + layer.offset
    return s.min(axis=1) < reach


def exact_errors(space, sol, exact, levels=0, chunk=4000):
    """Errors in the energy norm of psi, the H1 seminorm of u, and combined.

    Triangles touching a declared layer are integrated with the layer-graded
    rule (``levels`` extra bisections of its breakpoints); all others with the
    degree-6 triangle rule.
    """
    mesh = space.mesh
    if len(sol.psi) != space.n_dofs or len(sol.u) != space.n_dofs:
        raise ValueError("solution does not live on this space")
    special = np.zeros(mesh.n_triangles, dtype=bool)
    for layer in exact.layers:
        special |= _near_layer(mesh, layer, 48.0 * layer.width)
    totals = np.zeros(3)
    plain = np.flatnonzero(~special)
    rule = triangle_rule(ERROR_RULE_DEGREE)
    pts_all, wts_all = physical_points(mesh, rule)
    for s in range(0, len(plain), 4 * chunk):
        tri = plain[s:s + 4 * chunk]
        totals += _error_terms(space, sol, exact, tri, pts_all[tri], wts_all[tri])
    layered = np.flatnonzero(special)
    if len(layered):
        # one graded rule per triangle, w.r.t. the first layer it touches
        for layer in exact.layers:
            hit = layered[_near_layer(mesh, layer, 48.0 * layer.width)[layered]]
            layered = np.setdiff1d(layered, hit)
            for s in range(0, len(hit), chunk):
                tri = hit[s:s + chunk]
                pts, wts = layer_graded_points(mesh.vertices[mesh.triangles[tri]], layer.normal,
                                               layer.offset, layer.width, levels=levels)
                totals += _error_terms(space, sol, exact, tri, pts, wts)
    psi_l2, psi_semi, u_h1 = totals
    energy_psi = float(np.sqrt(psi_l2 + psi_semi))
    h1_u = float(np.sqrt(u_h1))
    return {"energy_psi": energy_psi, "h1_u": h1_u,
            "combined": float(np.hypot(energy_psi, h1_u))}


def effectivity(eta_psi, eta_u, errors):
    """Effectivity indices; the combined one uses the plain sum eta_psi + eta_u."""
    if errors["energy_psi"] == 0.0 or errors["combined"] == 0.0:
        raise ZeroDivisionError("exact error is zero; effectivity undefined")
    return {"eff_psi": eta_psi / errors["energy_psi"],
            "eff_combined": (eta_psi + eta_u) / errors["combined"]}
