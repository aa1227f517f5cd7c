"""Conforming triangle meshes and longest-edge (Rivara) refinement."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# relative tolerance when comparing squared edge lengths for ties
_TIE_RTOL = 1e-12


class NonConformingMeshError(ValueError):
    pass


class TriMesh:
    """Immutable triangle mesh.

    Parameters
    ----------
    vertices : (n, 2) array_like
    triangles : (m, 3) array_like of int
        Counterclockwise vertex triples.
    generation : (m,) array_like of int, optional
        Refinement depth of each triangle (0 on the initial mesh).
    """

    def __init__(self, vertices, triangles, generation=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 2)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        if generation is None:
            generation = np.zeros(len(self.triangles), dtype=np.int64)
        self.generation = np.asarray(generation, dtype=np.int64)
        for arr in (self.vertices, self.triangles, self.generation):
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    # -- derived geometry -------------------------------------------------

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self):
        return np.abs(self.signed_areas)

    @cached_property
    def edge_lengths(self):
        """(m, 3) length of the edge opposite each local vertex."""
        p = self.vertices[self.triangles]
        return np.stack([
            np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        ], axis=1)

    @property
    def h(self):
        """Element diameters (longest edge)."""
        return self.edge_lengths.max(axis=1)

    @property
    def h_min(self):
        """Shortest edge in the mesh."""
        return float(self.edge_lengths.min())

    @property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    # -- derived topology -------------------------------------------------

    @cached_property
    def _topology(self):
        tri = self.triangles
        m = len(tri)
        # local edge i is opposite local vertex i
        local = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = tri[:, local].reshape(-1, 2)
        keys = np.sort(pairs, axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        tri_edges = inverse.reshape(m, 3)
        counts = np.bincount(inverse, minlength=len(edges))
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        owner = np.repeat(np.arange(m), 3)
        order = np.argsort(inverse, kind="stable")
        first = np.ones(len(order), dtype=bool)
        first[1:] = inverse[order][1:] != inverse[order][:-1]
        edge_tris[inverse[order][first], 0] = owner[order][first]
        second = ~first
        edge_tris[inverse[order][second], 1] = owner[order][second]
        return edges, tri_edges, edge_tris, counts

    @property
    def edges(self):
        """(ne, 2) sorted vertex pairs."""
        return self._topology[0]

    @property
    def tri_edges(self):
        """(m, 3) edge index opposite each local vertex."""
        return self._topology[1]

    @property
    def edge_triangles(self):
        """(ne, 2) incident triangles; second entry -1 on the boundary."""
        return self._topology[2]

    @property
    def edge_incidence(self):
        return self._topology[3]

    @cached_property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_incidence == 1)

    @cached_property
    def interior_edges(self):
        return np.flatnonzero(self.edge_incidence == 2)

    @cached_property
    def boundary_vertex_flags(self):
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[self.edges[self.boundary_edges].ravel()] = True
        return flags

    def neighbors(self, t):
        """Triangles sharing an edge with triangle ``t``."""
        out = []
        for e in self.tri_edges[t]:
            a, b = self.edge_triangles[e]
            other = b if a == t else a
            if other >= 0:
                out.append(int(other))
        return out

    # -- io -----------------------------------------------------------------

    def to_text(self):
        lines = [str(self.n_vertices)]
        lines += [f"{x!r} {y!r}" for x, y in self.vertices.tolist()]
        lines.append(str(self.n_triangles))
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles.tolist()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        tokens = text.split()
        nv = int(tokens[0])
        verts = np.array(tokens[1:1 + 2 * nv], dtype=float).reshape(nv, 2)
        pos = 1 + 2 * nv
        nt = int(tokens[pos])
        tris = np.array(tokens[pos + 1:pos + 1 + 3 * nt], dtype=np.int64).reshape(nt, 3)
        return cls(verts, tris)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    def __repr__(self):
        return f"TriMesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles})"


def unit_square_initial():
    """The unit square as 2x2 cells, each cut by the diagonal through the centre.

    Gives 8 isosceles right triangles whose hypotenuses meet at (1/2, 1/2),
    so the mesh is symmetric under the full symmetry group of the square.
    """
    xs = np.array([0.0, 0.5, 1.0])
    vertices = np.array([(x, y) for y in xs for x in xs])

    def v(i, j):
        return 3 * j + i

    tris = []
    for j in range(2):
        for i in range(2):
            a, b, c, d = v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)
            # diagonal from the cell corner at the square's corner to the centre
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return TriMesh(vertices, tris)


# ---------------------------------------------------------------------------
# quality


@dataclass(frozen=True)
class QualityReport:
    conforming: bool
    min_angle_deg: float
    h_min: float
    h_max: float
    c0_estimate: float
    n_triangles: int
    n_vertices: int


def min_angles(mesh):
    """(m,) smallest interior angle of each triangle, in degrees."""
    lengths = mesh.edge_lengths
    a, b, c = lengths[:, 0], lengths[:, 1], lengths[:, 2]
    angles = []
    for opp, s1, s2 in ((a, b, c), (b, c, a), (c, a, b)):
        cosv = np.clip((s1 ** 2 + s2 ** 2 - opp ** 2) / (2 * s1 * s2), -1.0, 1.0)
        angles.append(np.degrees(np.arccos(cosv)))
    return np.min(np.stack(angles, axis=1), axis=1)


def _has_hanging_nodes(mesh):
    """True if some vertex lies strictly inside a boundary-type edge.

    In a conforming mesh of a polygon only true boundary edges have a single
    incident triangle, so it suffices to test those edges.
    """
    verts = mesh.vertices
    edges = mesh.edges[mesh.boundary_edges]
    if len(edges) == 0:
        return False
    p, q = verts[edges[:, 0]], verts[edges[:, 1]]
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    cand = verts[used]
    lo = np.minimum(p, q)
    hi = np.maximum(p, q)
    scale = np.linalg.norm(q - p, axis=1)
    # chunk edges to bound memory
    for s in range(0, len(edges), 256):
        sl = slice(s, s + 256)
        d = q[sl, None, :] - p[sl, None, :]
        w = cand[None, :, :] - p[sl, None, :]
        cross = d[..., 0] * w[..., 1] - d[..., 1] * w[..., 0]
        on_line = np.abs(cross) <= 1e-12 * scale[sl, None] ** 2
        inside = np.all((cand[None] > lo[sl, None] + 1e-14) | (np.abs(d) < 1e-14), axis=2)
        inside &= np.all((cand[None] < hi[sl, None] - 1e-14) | (np.abs(d) < 1e-14), axis=2)
        if np.any(on_line & inside):
            return True
    return False


def is_conforming(mesh):
    if np.any(mesh.edge_incidence > 2):
        return False
    return not _has_hanging_nodes(mesh)


def topology_check(mesh):
    """Audit conformity and shape regularity of ``mesh``."""
    h = mesh.h
    areas = mesh.areas
    ratio = areas / h ** 2
    c0 = float(max(ratio.max(), 1.0 / ratio.min()))
    return QualityReport(
        conforming=bool(is_conforming(mesh) and np.all(mesh.signed_areas > 0)),
        min_angle_deg=float(min_angles(mesh).min()),
        h_min=mesh.h_min,
        h_max=float(h.max()),
        c0_estimate=c0,
        n_triangles=mesh.n_triangles,
        n_vertices=mesh.n_vertices,
    )


# ---------------------------------------------------------------------------
# refinement


class _Refiner:
    """Mutable workspace for one refinement pass."""

    def __init__(self, mesh):
        self.verts = mesh.vertices.tolist()
        self.tris = mesh.triangles.tolist()
        self.gen = mesh.generation.tolist()
        self.edge_map = {}
        for t, (a, b, c) in enumerate(self.tris):
            for e in ((b, c), (c, a), (a, b)):
                self.edge_map.setdefault(_key(*e), []).append(t)
        for key, owners in self.edge_map.items():
            if len(owners) > 2:
                raise NonConformingMeshError(f"edge {key} has {len(owners)} triangles")
        self.midpoints = {}
        self.parents = []

    def longest_edge(self, t):
        """Local index of the refinement edge; ties go to the smaller opposite vertex."""
        tri = self.tris[t]
        pts = [self.verts[v] for v in tri]
        best, best_len, best_opp = -1, -1.0, -1
        for i in range(3):
            p, q = pts[(i + 1) % 3], pts[(i + 2) % 3]
            ln = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
            if best < 0 or ln > best_len * (1 + _TIE_RTOL):
                best, best_len, best_opp = i, ln, tri[i]
            elif ln >= best_len * (1 - _TIE_RTOL) and tri[i] < best_opp:
                best, best_len, best_opp = i, max(ln, best_len), tri[i]
        return best

    def refinement_key(self, t):
        i = self.longest_edge(t)
        tri = self.tris[t]
        return _key(tri[(i + 1) % 3], tri[(i + 2) % 3])

    def neighbor(self, t, key):
        for o in self.edge_map[key]:
            if o != t:
                return o
        return -1

    def midpoint(self, key):
        m = self.midpoints.get(key)
        if m is None:
            a, b = key
            pa, pb = self.verts[a], self.verts[b]
            self.verts.append([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])])
            m = len(self.verts) - 1
            self.midpoints[key] = m
            self.parents.append(key)
        return m

    def _remove(self, t):
        a, b, c = self.tris[t]
        for e in ((b, c), (c, a), (a, b)):
            self.edge_map[_key(*e)].remove(t)

    def _add(self, t):
        a, b, c = self.tris[t]
        for e in ((b, c), (c, a), (a, b)):
            self.edge_map.setdefault(_key(*e), []).append(t)

    def bisect(self, t, key):
        """Split ``t`` through the midpoint of edge ``key``; returns the new slot."""
        tri = self.tris[t]
        i = next(j for j in range(3) if tri[j] not in key)
        c, a, b = tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]
        m = self.midpoint(key)
        self._remove(t)
        g = self.gen[t] + 1
        self.tris[t] = [a, m, c]
        self.gen[t] = g
        self.tris.append([m, b, c])
        self.gen.append(g)
        new = len(self.tris) - 1
        self._add(t)
        self._add(new)
        if not self.edge_map.get(key, True):
            del self.edge_map[key]
        return new


def _key(a, b):
    return (a, b) if a < b else (b, a)


def refine(mesh, marked):
    """Bisect every marked triangle at its longest edge, with conforming closure.

    Input vertices are kept as a prefix of the output vertex array.
    """
    return refine_with_parents(mesh, marked)[0]


def refine_with_parents(mesh, marked):
    """Like :func:`refine`, also returning the parent edge of each new vertex.

    Returns
    -------
    fine : TriMesh
    parents : (k, 2) int array
        Endpoints of the bisected edge for vertices ``n_old .. n_old + k - 1``
        in creation order; a parent may itself be a new vertex created earlier.
    """
    marked = sorted({int(t) for t in marked})
    if not marked:
        return mesh, np.zeros((0, 2), dtype=np.int64)
    if marked[0] < 0 or marked[-1] >= mesh.n_triangles:
        raise IndexError("marked triangle index out of range")
    r = _Refiner(mesh)
    n0 = mesh.n_triangles
    original_gen = list(r.gen[:n0])
    for t in marked:
        # a triangle already split by an earlier closure counts as refined
        if r.gen[t] != original_gen[t]:
            continue
        _refine_until_split(r, t, original_gen[t])
    fine = TriMesh(np.array(r.verts), np.array(r.tris), np.array(r.gen))
    return fine, np.array(r.parents, dtype=np.int64).reshape(-1, 2)


def prolongate(values, parents):
    """Extend nodal P1 values to the midpoints listed in ``parents``.

    The result is the P1 interpolant of the coarse field on the fine mesh.
    """
    values = np.asarray(values, dtype=float)
    out = np.empty(len(values) + len(parents))
    out[:len(values)] = values
    n = len(values)
    for i, (a, b) in enumerate(parents):
        out[n + i] = 0.5 * (out[a] + out[b])
    return out


def _refine_until_split(r, t, gen0):
    """Run the closure for ``t``; slot ``t`` is rewritten when ``t`` is split."""
    stack = [t]
    while stack:
        cur = stack[-1]
        if cur == t and r.gen[t] != gen0:
            stack.pop()
            continue
        key = r.refinement_key(cur)
        nb = r.neighbor(cur, key)
        if nb < 0:
            r.bisect(cur, key)
            stack.pop()
        elif r.refinement_key(nb) == key:
            r.bisect(cur, key)
            r.bisect(nb, key)
            stack.pop()
        else:
            stack.append(nb)
