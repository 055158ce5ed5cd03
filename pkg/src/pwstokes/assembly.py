"""Sparse blocks of the discrete Stokes saddle-point system."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import QuadratureUnsupported, UnsupportedDegree
from .mesh import Mesh
from .polynomials import QuadratureRule, gauss_triangle
from .spaces import (ConstraintSet, PressureDofMap, VelocityDofMap, build_constraints,
                     build_pressure_space, build_velocity_space)


@dataclass(frozen=True)
class ElementData:
    """Physical basis data at the quadrature points of every triangle."""

    rule: QuadratureRule
    area: np.ndarray     # (nt,)
    x: np.ndarray        # (nt, nq, 2) physical quadrature points
    phi: np.ndarray      # (nq, nv_loc) velocity basis values
    dphi: np.ndarray     # (nt, nq, nv_loc, 2) physical gradients
    psi: np.ndarray      # (nq, np_loc) pressure basis values

    @property
    def jxw(self) -> np.ndarray:
        """(nt, nq) integration weights |K| * w_q."""
        return self.area[:, None] * self.rule.weights[None, :]


def element_data(mesh: Mesh, velocity: VelocityDofMap, pressure: PressureDofMap,
                 rule: QuadratureRule) -> ElementData:
    p = mesh.vertices[mesh.triangles]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv_t = np.empty_like(J)  # J^{-T}
    inv_t[:, 0, 0] = J[:, 1, 1] / det
    inv_t[:, 0, 1] = -J[:, 1, 0] / det
    inv_t[:, 1, 0] = -J[:, 0, 1] / det
    inv_t[:, 1, 1] = J[:, 0, 0] / det
    ref_grad = velocity.basis.grad(rule.points)
    dphi = np.einsum("tij,qaj->tqai", inv_t, ref_grad)
    x = np.einsum("qm,tmd->tqd", rule.points, p)
    return ElementData(rule, 0.5 * det, x, velocity.basis.eval(rule.points), dphi,
                       pressure.basis.eval(rule.points))


def default_rule(k: int, bump: int = 0) -> QuadratureRule:
    try:
        return gauss_triangle(2 * k + bump)
    except UnsupportedDegree as exc:
        raise QuadratureUnsupported(str(exc)) from exc


def _scatter(rows, cols, vals, shape):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


def assemble_stiffness_full(mesh, velocity, data: ElementData) -> sp.csr_matrix:
    """grad-grad matrix over all vector dofs (no boundary elimination)."""
    if data.rule.degree < 2 * velocity.k - 2:
        raise QuadratureUnsupported("rule too weak for the stiffness integrand")
    ke = np.einsum("tq,tqad,tqbd->tab", data.jxw, data.dphi, data.dphi)
    nodes = velocity.cell_nodes
    n = velocity.n_dofs
    blocks = []
    for c in range(2):
        d = 2 * nodes + c
        blocks.append((np.broadcast_to(d[:, :, None], ke.shape),
                       np.broadcast_to(d[:, None, :], ke.shape), ke))
    rows = np.concatenate([b[0].ravel() for b in blocks])
    cols = np.concatenate([b[1].ravel() for b in blocks])
    vals = np.concatenate([b[2].ravel() for b in blocks])
    return _scatter(rows, cols, vals, (n, n))


def assemble_stiffness(mesh, velocity, data: ElementData) -> sp.csr_matrix:
    A = assemble_stiffness_full(mesh, velocity, data)
    f = velocity.free
    return A[f][:, f].tocsr()


def assemble_divergence_full(mesh, velocity, pressure, data: ElementData) -> sp.csr_matrix:
    """B[m, i] = integral of psi_m div(phi_i) over all vector dofs."""
    if data.rule.degree < 2 * velocity.k - 2:
        raise QuadratureUnsupported("rule too weak for the divergence integrand")
    be = np.einsum("tq,qm,tqac->tmac", data.jxw, data.psi, data.dphi)
    pd = pressure.cell_dofs()
    vd = velocity.cell_dofs()
    shape = be.shape
    rows = np.broadcast_to(pd[:, :, None, None], shape)
    cols = np.broadcast_to(vd[:, None, :, :], shape)
    return _scatter(rows, cols, be, (pressure.n_dofs, velocity.n_dofs))


def assemble_divergence(mesh, velocity, pressure, data: ElementData) -> sp.csr_matrix:
    return assemble_divergence_full(mesh, velocity, pressure, data)[:, velocity.free].tocsr()


def assemble_velocity_mass(mesh, velocity, data: ElementData) -> sp.csr_matrix:
    me = np.einsum("tq,qa,qb->tab", data.jxw, data.phi, data.phi)
    nodes = velocity.cell_nodes
    rows, cols, vals = [], [], []
    for c in range(2):
        d = 2 * nodes + c
        rows.append(np.broadcast_to(d[:, :, None], me.shape).ravel())
        cols.append(np.broadcast_to(d[:, None, :], me.shape).ravel())
        vals.append(me.ravel())
    M = _scatter(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                 (velocity.n_dofs, velocity.n_dofs))
    f = velocity.free
    return M[f][:, f].tocsr()


def assemble_pressure_mass(mesh, pressure, data: ElementData) -> sp.csr_matrix:
    me = np.einsum("tq,qa,qb->tab", data.jxw, data.psi, data.psi)
    d = pressure.cell_dofs()
    rows = np.broadcast_to(d[:, :, None], me.shape)
    cols = np.broadcast_to(d[:, None, :], me.shape)
    return _scatter(rows, cols, me, (pressure.n_dofs, pressure.n_dofs))


def assemble_load_full(mesh, velocity, data: ElementData, force) -> np.ndarray:
    """Entries integral of <f, phi_i> over all vector dofs.

    ``force(x, y)`` returns the two components as arrays.
    """
    x = data.x[..., 0]
    y = data.x[..., 1]
    f1, f2 = force(x, y)
    out = np.zeros(velocity.n_dofs)
    for c, fc in enumerate((f1, f2)):
        fc = np.broadcast_to(np.asarray(fc, dtype=float), x.shape)
        le = np.einsum("tq,tq,qa->ta", data.jxw, fc, data.phi)
        np.add.at(out, 2 * velocity.cell_nodes + c, le)
    return out


def assemble_load(mesh, velocity, data: ElementData, force) -> np.ndarray:
    return assemble_load_full(mesh, velocity, data, force)[velocity.free]


@dataclass(frozen=True)
class SaddleSystem:
    """Blocks of a(u,v) - b(v,p) = F(v), b(u,q) = 0 on free velocity dofs.

    ``B`` maps free velocity dofs to raw pressure dofs; ``C`` holds the
    constraint rows (mean-zero first).
    """

    mesh: Mesh
    velocity: VelocityDofMap
    pressure: PressureDofMap
    constraints: ConstraintSet
    data: ElementData
    A: sp.csr_matrix
    B: sp.csr_matrix
    Mu: sp.csr_matrix
    Mp: sp.csr_matrix
    f: np.ndarray

    @property
    def C(self) -> sp.csr_matrix:
        return self.constraints.rows

    @property
    def k(self) -> int:
        return self.velocity.k

    def with_constraints(self, constraints: ConstraintSet) -> "SaddleSystem":
        return SaddleSystem(self.mesh, self.velocity, self.pressure, constraints, self.data,
                            self.A, self.B, self.Mu, self.Mp, self.f)


def assemble_system(mesh: Mesh, k: int, force=None, critical=None, eta: float | None = None,
                    quad_bump: int = 0) -> SaddleSystem:
    velocity = build_velocity_space(mesh, k)
    pressure = build_pressure_space(mesh, k)
    constraints = build_constraints(mesh, pressure, eta=eta, critical=critical)
    data = element_data(mesh, velocity, pressure, default_rule(k, quad_bump))
    A = assemble_stiffness(mesh, velocity, data)
    B = assemble_divergence(mesh, velocity, pressure, data)
    Mu = assemble_velocity_mass(mesh, velocity, data)
    Mp = assemble_pressure_mass(mesh, pressure, data)
    if force is None:
        f = np.zeros(velocity.n_free)
    else:
        f = assemble_load(mesh, velocity, data, force)
    return SaddleSystem(mesh, velocity, pressure, constraints, data, A, B, Mu, Mp, f)


def write_triplets(matrix, path) -> None:
    """Coordinate text export: ``rows cols nnz`` then ``i j value`` lines."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


def read_triplets(path) -> sp.csr_matrix:
    with open(path) as fh:
        n, m, nnz = (int(x) for x in fh.readline().split())
        rows, cols, vals = [], [], []
        for line in fh:
            i, j, v = line.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    if len(vals) != nnz:
        raise ValueError(f"expected {nnz} entries, read {len(vals)}")
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, m)).tocsr()
