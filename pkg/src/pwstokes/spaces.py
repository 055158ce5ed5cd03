"""Degree-of-freedom maps for S_{k,0}^2 and P_{k-1}, and the pressure constraints."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .mesh import Mesh, vertex_patch
from .polynomials import ReferenceBasis, gauss_triangle
from .singularity import alternating_signs, eta_critical_set

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VelocityDofMap:
    """Continuous degree-k nodes; vector dof of (node, component) is 2*node + component."""

    k: int
    basis: ReferenceBasis
    cell_nodes: np.ndarray      # (n_triangles, n_local) global node ids
    node_points: np.ndarray     # (n_nodes, 2)
    boundary_node: np.ndarray   # (n_nodes,) bool
    free: np.ndarray            # free vector dofs, increasing

    @property
    def n_nodes(self) -> int:
        return len(self.node_points)

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_free(self) -> int:
        return len(self.free)

    def cell_dofs(self) -> np.ndarray:
        """(n_triangles, n_local, 2) vector dof ids."""
        return np.stack([2 * self.cell_nodes, 2 * self.cell_nodes + 1], axis=-1)

    def expand(self, u_free) -> np.ndarray:
        """Free dof vector -> full vector with zero Dirichlet values."""
        full = np.zeros(self.n_dofs)
        full[self.free] = u_free
        return full

    def interpolate(self, field) -> np.ndarray:
        """Nodal interpolant of ``field(x, y) -> (u1, u2)`` as a full dof vector."""
        u1, u2 = field(self.node_points[:, 0], self.node_points[:, 1])
        full = np.empty(self.n_dofs)
        full[0::2] = u1
        full[1::2] = u2
        return full


def build_velocity_space(mesh: Mesh, k: int) -> VelocityDofMap:
    """Nodes are keyed by their (vertex, weight) support so shared nodes coincide."""
    if k < 1:
        raise ValueError("velocity degree must be >= 1")
    if k < 4:
        log.warning("velocity degree k=%d < 4: Scott-Vogelius stability is not expected", k)
    basis = ReferenceBasis(k)
    keys = {}
    cell_nodes = np.empty((mesh.n_triangles, len(basis)), dtype=np.int64)
    points = []
    on_boundary = []
    bedges = {tuple(e) for e in mesh.edges[mesh.boundary_edge].tolist()}
    p = mesh.vertices
    for t, tri in enumerate(mesh.triangles.tolist()):
        for a, w in enumerate(basis.multi.tolist()):
            key = tuple(sorted((tri[m], w[m]) for m in range(3) if w[m]))
            gid = keys.get(key)
            if gid is None:
                gid = len(points)
                keys[key] = gid
                points.append(sum(w[m] * p[tri[m]] for m in range(3)) / k)
                support = tuple(sorted(v for v, _ in key))
                if len(support) == 1:
                    on_boundary.append(bool(mesh.boundary_vertex[support[0]]))
                elif len(support) == 2:
                    on_boundary.append(support in bedges)
                else:
                    on_boundary.append(False)
            cell_nodes[t, a] = gid
    boundary_node = np.array(on_boundary)
    free = np.flatnonzero(~np.repeat(boundary_node, 2))
    return VelocityDofMap(k, basis, cell_nodes, np.array(points), boundary_node, free)


@dataclass(frozen=True)
class PressureDofMap:
    """Discontinuous degree k-1 blocks: dof = triangle * n_local + local."""

    k: int
    basis: ReferenceBasis
    n_triangles: int

    @property
    def n_local(self) -> int:
        return len(self.basis)

    @property
    def n_dofs(self) -> int:
        return self.n_triangles * self.n_local

    def cell_dofs(self) -> np.ndarray:
        return np.arange(self.n_dofs).reshape(self.n_triangles, self.n_local)

    def vertex_trace_weights(self, mesh: Mesh, triangle: int, z: int) -> np.ndarray:
        """Coefficients w with q|_K(z) = w @ q_block."""
        lam = (mesh.triangles[triangle] == z).astype(float)
        return self.basis.eval(lam[None, :])[0]


def build_pressure_space(mesh: Mesh, k: int) -> PressureDofMap:
    if k < 1:
        raise ValueError("k >= 1 required (pressure degree k-1)")
    return PressureDofMap(k, ReferenceBasis(k - 1), mesh.n_triangles)


@dataclass(frozen=True)
class ConstraintSet:
    """Row 0 is the mean-zero functional; row i>0 is A_{T,z} for ``labels[i]``."""

    rows: sp.csr_matrix
    labels: tuple

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def vertices(self) -> tuple:
        return tuple(self.labels[1:])


def mean_row(mesh: Mesh, pressure: PressureDofMap) -> np.ndarray:
    rule = gauss_triangle(max(pressure.k - 1, 0))
    local = rule.weights @ pressure.basis.eval(rule.points)
    return (mesh.areas()[:, None] * local[None, :]).ravel()


def alternating_row(mesh: Mesh, pressure: PressureDofMap, z: int) -> np.ndarray:
    patch = vertex_patch(mesh, z)
    row = np.zeros(pressure.n_dofs)
    blocks = pressure.cell_dofs()
    for sign, t in zip(alternating_signs(patch.n), patch.triangles):
        row[blocks[t]] += sign * pressure.vertex_trace_weights(mesh, t, z)
    return row


def build_constraints(mesh: Mesh, pressure: PressureDofMap, eta: float | None = None,
                      critical=None) -> ConstraintSet:
    """Mean-zero row plus one alternating row per critical vertex.

    The critical set is ``eta_critical_set(mesh, eta)`` unless given explicitly.
    """
    if critical is None:
        critical = eta_critical_set(mesh, 0.0 if eta is None else eta)
    critical = sorted(int(z) for z in critical)
    rows = [mean_row(mesh, pressure)] + [alternating_row(mesh, pressure, z) for z in critical]
    return ConstraintSet(sp.csr_matrix(np.array(rows)), ("mean",) + tuple(critical))


def constraint_rank(constraints: ConstraintSet, tol: float = 1e-10):
    """Numerical rank of the rows and the indices of an independent subset."""
    ct = constraints.rows.T.toarray()
    _, r, piv = scipy.linalg.qr(ct, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    if not len(d) or d[0] == 0:
        return 0, np.array([], dtype=int)
    rank = int((d > tol * d[0]).sum())
    return rank, np.sort(piv[:rank])


def pressure_subspace_dim(constraints: ConstraintSet, pressure: PressureDofMap) -> int:
    rank, _ = constraint_rank(constraints)
    return pressure.n_dofs - rank
