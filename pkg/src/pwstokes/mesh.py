"""Conforming triangulations, red refinement and vertex-patch geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DegenerateTriangle, IndexOutOfRange, MeshFormatError,
                     NonConforming, OutOfRange)

# triangle rejected when |K| < DEGENERACY_TOL * h_K**2
DEGENERACY_TOL = 1e-14

# vertex id of the perturbed centre in criss_cross_mesh; kept by red_refine
CRISS_CROSS_CENTER = 4


@dataclass(frozen=True)
class Mesh:
    """Immutable conforming triangulation.

    ``triangles`` are counterclockwise.  ``edges`` are sorted vertex pairs in
    lexicographic order, ``edge_triangles[e]`` holds the (one or two) adjacent
    triangle ids with ``-1`` padding for boundary edges, and
    ``triangle_edges[t, i]`` is the edge opposite local vertex ``i``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_triangles: np.ndarray
    triangle_edges: np.ndarray
    boundary_edge: np.ndarray
    boundary_vertex: np.ndarray
    _vertex_triangles: tuple = field(repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_interior_edges(self) -> int:
        return int((~self.boundary_edge).sum())

    @property
    def n_boundary_edges(self) -> int:
        return int(self.boundary_edge.sum())

    def vertex_triangles(self, z: int) -> tuple:
        return self._vertex_triangles[z]

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p[:, [1, 2, 0]] - p[:, [2, 0, 1]], axis=2)
        return lengths.max(axis=1)

    def edge_normals(self) -> np.ndarray:
        """Unit normals pointing out of the lower-id adjacent triangle.

        For boundary edges this is the outward normal of the domain.
        """
        a = self.vertices[self.edges[:, 0]]
        b = self.vertices[self.edges[:, 1]]
        t = b - a
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1)[:, None]
        owner = self.edge_triangles[:, 0]
        centroid = self.vertices[self.triangles[owner]].mean(axis=1)
        flip = np.einsum("ij,ij->i", centroid - a, n) > 0
        n[flip] *= -1
        return n

    def with_vertices(self, vertices) -> "Mesh":
        return build_mesh(vertices, self.triangles)


def _orient(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    h = np.linalg.norm(p[:, [1, 2, 0]] - p[:, [2, 0, 1]], axis=2).max(axis=1)
    bad = np.abs(signed) <= DEGENERACY_TOL * h**2
    if bad.any():
        t = int(np.flatnonzero(bad)[0])
        raise DegenerateTriangle(f"triangle {t} has area {signed[t]:.3e}")
    triangles = triangles.copy()
    neg = signed < 0
    triangles[neg] = triangles[neg][:, [0, 2, 1]]
    return triangles


def build_mesh(vertices, triangles) -> Mesh:
    """Validate a triangulation and derive its edge/boundary structure."""
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if not np.all(np.isfinite(vertices)):
        raise MeshFormatError("non-finite vertex coordinates")
    nv = len(vertices)
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        raise IndexOutOfRange("triangle references a vertex outside 0..%d" % (nv - 1))
    if np.any((triangles[:, 0] == triangles[:, 1]) | (triangles[:, 1] == triangles[:, 2])
              | (triangles[:, 0] == triangles[:, 2])):
        raise DegenerateTriangle("triangle with repeated vertex ids")
    triangles = _orient(vertices, triangles)

    nt = len(triangles)
    local = np.array([[1, 2], [2, 0], [0, 1]])
    pairs = np.sort(triangles[:, local].reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True,
                                       return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        raise NonConforming("edge shared by more than two triangles")
    triangle_edges = inverse.reshape(nt, 3)
    edge_triangles = -np.ones((len(edges), 2), dtype=np.int64)
    owner = np.repeat(np.arange(nt), 3)
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_triangles[sorted_edges[first], 0] = owner[order[first]]
    edge_triangles[sorted_edges[~first], 1] = owner[order[~first]]
    boundary_edge = counts == 1

    boundary_vertex = np.zeros(nv, dtype=bool)
    boundary_vertex[edges[boundary_edge].ravel()] = True

    _check_interior_edges(vertices, triangles, edges, edge_triangles, boundary_edge)
    _check_hanging_nodes(vertices, edges[boundary_edge])

    vt = [[] for _ in range(nv)]
    for t, tri in enumerate(triangles):
        for v in tri:
            vt[v].append(t)
    return Mesh(vertices, triangles, edges, edge_triangles, triangle_edges,
                boundary_edge, boundary_vertex, tuple(tuple(x) for x in vt))


def _check_interior_edges(vertices, triangles, edges, edge_triangles, boundary_edge):
    # the two triangles of an interior edge must lie on opposite sides of it
    inner = np.flatnonzero(~boundary_edge)
    if not len(inner):
        return
    a = vertices[edges[inner, 0]]
    t = vertices[edges[inner, 1]] - a
    sides = []
    for slot in range(2):
        c = vertices[triangles[edge_triangles[inner, slot]]].mean(axis=1) - a
        sides.append(np.sign(t[:, 0] * c[:, 1] - t[:, 1] * c[:, 0]))
    if np.any(sides[0] == sides[1]):
        raise NonConforming("overlapping triangles across an edge")


def _check_hanging_nodes(vertices, boundary_edges):
    if not len(boundary_edges):
        return
    a = vertices[boundary_edges[:, 0]]
    b = vertices[boundary_edges[:, 1]]
    t = b - a
    length2 = np.einsum("ij,ij->i", t, t)
    for e in range(len(boundary_edges)):
        d = vertices - a[e]
        s = d @ t[e] / length2[e]
        dist = np.abs(d[:, 0] * t[e, 1] - d[:, 1] * t[e, 0]) / math.sqrt(length2[e])
        hit = (s > 1e-12) & (s < 1 - 1e-12) & (dist < 1e-12 * math.sqrt(length2[e]))
        if hit.any():
            v = int(np.flatnonzero(hit)[0])
            raise NonConforming(f"hanging node {v} on edge {tuple(boundary_edges[e])}")


def criss_cross_mesh(eps: float = 0.0) -> Mesh:
    """Unit square cut by both diagonals, centre moved to (1/2 + eps, 1/2)."""
    if not 0.0 <= eps < 0.5:
        raise OutOfRange(f"eps must lie in [0, 1/2), got {eps}")
    vertices = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5 + eps, 0.5)]
    triangles = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return build_mesh(vertices, triangles)


def red_refine(mesh: Mesh, levels: int = 1) -> Mesh:
    """Split every triangle into four congruent children through edge midpoints.

    Existing vertex ids are preserved; midpoint of edge ``e`` gets id
    ``n_vertices + e``.
    """
    for _ in range(levels):
        nv = mesh.n_vertices
        mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        vertices = np.vstack([mesh.vertices, mid])
        tri = mesh.triangles
        # triangle_edges[:, i] is opposite local vertex i
        m0 = nv + mesh.triangle_edges[:, 2]  # edge (v0, v1)
        m1 = nv + mesh.triangle_edges[:, 0]  # edge (v1, v2)
        m2 = nv + mesh.triangle_edges[:, 1]  # edge (v2, v0)
        children = np.stack([
            np.stack([tri[:, 0], m0, m2], axis=1),
            np.stack([m0, tri[:, 1], m1], axis=1),
            np.stack([m2, m1, tri[:, 2]], axis=1),
            np.stack([m0, m1, m2], axis=1),
        ], axis=1).reshape(-1, 3)
        mesh = build_mesh(vertices, children)
    return mesh


@dataclass(frozen=True)
class VertexPatch:
    """Counterclockwise fan of triangles around ``center``.

    ``rays[j]`` is the far endpoint of edge E_{j+1}; boundary patches carry
    one extra ray closing the fan.  ``sin``/``cos`` of the patch angles come
    from normalised cross and dot products, not from ``angles``.
    """

    center: int
    triangles: tuple
    angles: np.ndarray
    sin: np.ndarray
    cos: np.ndarray
    rays: tuple
    is_boundary: bool

    @property
    def n(self) -> int:
        return len(self.triangles)

    def tangents(self, mesh: Mesh) -> np.ndarray:
        d = mesh.vertices[list(self.rays)] - mesh.vertices[self.center]
        return d / np.linalg.norm(d, axis=1)[:, None]


def _corner(mesh, t, z):
    tri = mesh.triangles[t]
    li = int(np.flatnonzero(tri == z)[0])
    return int(tri[(li + 1) % 3]), int(tri[(li + 2) % 3])


def vertex_patch(mesh: Mesh, z: int) -> VertexPatch:
    if not 0 <= z < mesh.n_vertices:
        raise IndexOutOfRange(f"vertex {z} out of range")
    tris = sorted(mesh.vertex_triangles(z))
    corners = {t: _corner(mesh, t, z) for t in tris}
    is_boundary = bool(mesh.boundary_vertex[z])
    if is_boundary:
        # fan starts at the triangle whose first (clockwise-most) ray is a boundary edge
        seconds = {b for _, b in corners.values()}
        starts = [t for t in tris if corners[t][0] not in seconds]
        start = starts[0]
    else:
        start = tris[0]
    by_first = {corners[t][0]: t for t in tris}
    order = [start]
    while len(order) < len(tris):
        nxt = by_first.get(corners[order[-1]][1])
        if nxt is None or nxt in order:
            raise NonConforming(f"patch of vertex {z} is not a single fan")
        order.append(nxt)
    rays = [corners[t][0] for t in order]
    if is_boundary:
        rays.append(corners[order[-1]][1])
    p = mesh.vertices
    s, c = [], []
    for t in order:
        a, b = corners[t]
        u = p[a] - p[z]
        v = p[b] - p[z]
        nu, nv_ = math.hypot(*u), math.hypot(*v)
        s.append((u[0] * v[1] - u[1] * v[0]) / (nu * nv_))
        c.append((u[0] * v[0] + u[1] * v[1]) / (nu * nv_))
    s = np.array(s)
    c = np.array(c)
    angles = np.arctan2(s, c)
    return VertexPatch(z, tuple(order), angles, s, c, tuple(rays), is_boundary)


def shape_regularity(mesh: Mesh) -> float:
    """max_K h_K / rho_K with rho_K the inscribed-circle diameter."""
    p = mesh.vertices[mesh.triangles]
    lengths = np.linalg.norm(p[:, [1, 2, 0]] - p[:, [2, 0, 1]], axis=2)
    area = mesh.areas()
    rho = 4.0 * area / lengths.sum(axis=1)
    h = lengths.max(axis=1)
    if np.any(rho <= DEGENERACY_TOL * h):
        raise DegenerateTriangle("inscribed circle collapsed")
    return float((h / rho).max())


def min_angle(mesh: Mesh) -> float:
    """Smallest interior angle over all triangles."""
    p = mesh.vertices[mesh.triangles]
    out = np.inf
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        ang = np.arctan2(np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]),
                         np.einsum("ij,ij->i", u, v))
        out = min(out, float(ang.min()))
    return out


def outer_angles(mesh: Mesh) -> dict:
    return {int(z): 2 * math.pi - float(vertex_patch(mesh, int(z)).angles.sum())
            for z in np.flatnonzero(mesh.boundary_vertex)}


def min_outer_angle(mesh: Mesh) -> float:
    angles = outer_angles(mesh)
    if not angles:
        raise ValueError("mesh has no boundary vertices")
    return min(angles.values())


def read_mesh(path) -> Mesh:
    """Read the ``nv nt`` / ``x y b`` / ``i j k`` text format."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        nv, nt = (int(x) for x in lines[0])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError("bad header, expected 'nv nt'") from exc
    if len(lines) != 1 + nv + nt:
        raise MeshFormatError(f"expected {1 + nv + nt} lines, found {len(lines)}")
    try:
        vrows = [(float(r[0]), float(r[1]), int(r[2])) for r in lines[1:1 + nv]]
        trows = [tuple(int(x) for x in r) for r in lines[1 + nv:]]
    except (ValueError, IndexError) as exc:
        raise MeshFormatError("malformed vertex or triangle line") from exc
    if any(len(r) != 3 for r in trows) or any(len(r) != 3 for r in lines[1:1 + nv]):
        raise MeshFormatError("vertex lines need 3 fields, triangle lines 3 ids")
    mesh = build_mesh([r[:2] for r in vrows], trows)
    flags = np.array([r[2] for r in vrows], dtype=bool)
    if not np.array_equal(flags, mesh.boundary_vertex):
        bad = int(np.flatnonzero(flags != mesh.boundary_vertex)[0])
        raise MeshFormatError(f"boundary flag of vertex {bad} disagrees with topology")
    return mesh


def write_mesh(mesh: Mesh, path) -> None:
    out = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    for (x, y), b in zip(mesh.vertices, mesh.boundary_vertex):
        out.append(f"{float(x)!r} {float(y)!r} {int(b)}")
    for tri in mesh.triangles:
        out.append(" ".join(str(int(i)) for i in tri))
    Path(path).write_text("\n".join(out) + "\n")
