"""Quadrature rules on the reference triangle and the unit interval.

Triangle rules are the symmetric positive-weight rules of Dunavant/Strang-Fix,
stored as barycentric points with weights summing to 1/2 (the reference
triangle's area).
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w] * 3


def _orbit6(a, b, w):
    c = 1.0 - a - b
    pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return pts, [w] * 6


def _build(groups, degree):
    pts, wts = [], []
    for p, w in groups:
        pts += p
        wts += w
    weights = 0.5 * np.array(wts) / np.sum(wts)
    return QuadRule(np.array(pts), weights, degree)


def _centroid(w):
    return [(1 / 3, 1 / 3, 1 / 3)], [w]


_TRIANGLE = {
    1: lambda: _build([_centroid(1.0)], 1),
    2: lambda: _build([_orbit3(1 / 6, 1 / 3)], 2),
    # the 4-point degree-3 rule has a negative weight; use degree 4 instead
    3: lambda: _TRIANGLE[4](),
    4: lambda: _build([
        _orbit3(0.445948490915965, 0.223381589678011),
        _orbit3(0.091576213509771, 0.109951743655322),
    ], 4),
    5: lambda: _build([
        _centroid(0.225),
        _orbit3(0.470142064105115, 0.132394152788506),
        _orbit3(0.101286507323456, 0.125939180544827),
    ], 5),
    6: lambda: _build([
        _orbit3(0.249286745170910, 0.116786275726379),
        _orbit3(0.063089014491502, 0.050844906370207),
        _orbit6(0.310352451033784, 0.053145049844817, 0.082851075618374),
    ], 6),
}

_cache = {}


def triangle_rule(degree):
    """Symmetric rule on the reference triangle exact to total ``degree``."""
    if degree not in _TRIANGLE:
        raise ValueError(f"unsupported triangle rule degree {degree}; use 1..6")
    key = ("tri", degree)
    if key not in _cache:
        rule = _TRIANGLE[degree]()
        _cache[key] = QuadRule(rule.points, rule.weights, degree)
    return _cache[key]


def edge_rule(degree):
    """Gauss-Legendre rule on [0, 1] exact to ``degree``."""
    if not 1 <= degree <= 11:
        raise ValueError(f"unsupported edge rule degree {degree}; use 1..11")
    key = ("edge", degree)
    if key not in _cache:
        n = degree // 2 + 1
        x, w = np.polynomial.legendre.leggauss(n)
        _cache[key] = QuadRule(0.5 * (x + 1.0), 0.5 * w, degree)
    return _cache[key]


# assembly defaults: 7-point triangle rule, 3-point edge rule
DEFAULT_TRIANGLE_DEGREE = 5
DEFAULT_EDGE_DEGREE = 5


def physical_points(mesh, rule):
    """(m, q, 2) quadrature points and (m, q) weights on every triangle of ``mesh``."""
    p = mesh.vertices[mesh.triangles]
    pts = np.einsum("qi,mid->mqd", rule.points, p)
    wts = 2.0 * mesh.areas[:, None] * rule.weights[None, :]
    return pts, wts


# breakpoints (in units of the layer width) for the layer-graded rule;
# exp(-d / width) is below 1e-20 beyond the last one
_LAYER_BREAKS = np.array([0.125, 0.25, 0.5, 1.0, 2.0, 3.0, 4.5, 6.5, 9.0, 13.0,
                          18.0, 25.0, 35.0, 48.0])


def layer_breakpoints(width, levels=0):
    b = np.concatenate([[0.0], _LAYER_BREAKS])
    for _ in range(levels):
        b = np.sort(np.concatenate([b, 0.5 * (b[1:] + b[:-1])]))
    return width * b[1:]


def layer_graded_points(tri_pts, normal, offset, width, levels=0, n_gauss=7):
    """Iterated Gauss rule graded towards the line ``normal . x + offset = 0``.

    Each triangle is sliced along level sets of the distance ``s = normal . x
    + offset`` at the vertices and at geometrically spaced breakpoints (scaled
    by ``width``); every slice is a trapezoid in (s, t) integrated by a tensor
    Gauss rule.  Returns points (m, q, 2) and weights (m, q).
    """
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    tang = np.array([-normal[1], normal[0]])
    s = tri_pts @ normal + offset
    t = tri_pts @ tang
    order = np.argsort(s, axis=1, kind="stable")
    s = np.take_along_axis(s, order, 1)
    t = np.take_along_axis(t, order, 1)
    s0, s1, s2 = s[:, 0:1], s[:, 1:2], s[:, 2:3]
    t0, t1, t2 = t[:, 0:1], t[:, 1:2], t[:, 2:3]
    breaks = layer_breakpoints(width, levels)[None, :]
    cand = np.concatenate([s, np.clip(breaks, s0, s2)], axis=1)
    cand.sort(axis=1)
    a, b = cand[:, :-1], cand[:, 1:]

    xi, wi = np.polynomial.legendre.leggauss(n_gauss)
    xi, wi = 0.5 * (xi + 1.0), 0.5 * wi
    sq = a[..., None] + (b - a)[..., None] * xi          # (m, P, n)
    ws = (b - a)[..., None] * wi

    def lerp(sv, sa, sb, ta, tb):
        span = sb - sa
        safe = np.where(span > 0, span, 1.0)
        lam = np.where(span[..., None] > 0, (sv - sa[..., None]) / safe[..., None], 0.0)
        return ta[..., None] + lam * (tb - ta)[..., None]

    t_long = lerp(sq, s0, s2, t0, t2)
    lower = (0.5 * (a + b) <= s1)[..., None]
    t_short = np.where(lower, lerp(sq, s0, s1, t0, t1), lerp(sq, s1, s2, t1, t2))
    tt = t_long[..., None] + (t_short - t_long)[..., None] * xi  # (m, P, n, n)
    w = ws[..., None] * np.abs(t_short - t_long)[..., None] * wi
    ss = np.broadcast_to(sq[..., None], tt.shape)
    xy = (ss - offset)[..., None] * normal + tt[..., None] * tang
    m = tri_pts.shape[0]
    return xy.reshape(m, -1, 2), w.reshape(m, -1)
