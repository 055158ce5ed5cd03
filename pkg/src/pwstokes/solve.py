"""Constrained saddle-point solve, error/divergence norms and inf-sup estimation."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SaddleSystem, element_data
from .errors import EigSolverFailure, EmptyPressureSpace, SingularSystem
from .polynomials import gauss_triangle
from .spaces import constraint_rank

log = logging.getLogger(__name__)


@dataclass
class DiscreteSolution:
    u: np.ndarray            # free velocity dofs
    p: np.ndarray            # raw pressure dofs
    lam: np.ndarray          # multipliers of the kept constraint rows
    system: SaddleSystem = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def u_full(self) -> np.ndarray:
        return self.system.velocity.expand(self.u)


def solve_stokes(system: SaddleSystem, refinement_steps: int = 2) -> DiscreteSolution:
    """Sparse LU solve of [[A, -B^T, 0], [-B, 0, C^T], [0, C, 0]].

    A few steps of iterative refinement with the same factorization push the
    mass residual, and with it the divergence of u, down to rounding level.
    """
    A, B = system.A, system.B
    rank, keep = constraint_rank(system.constraints)
    dropped = system.constraints.n_rows - rank
    if dropped:
        log.warning("dropping %d redundant constraint rows", dropped)
    C = system.C[keep]
    nu, npr, nc = A.shape[0], B.shape[0], C.shape[0]
    K = sp.bmat([[A, -B.T, None], [-B, None, C.T], [None, C, None]], format="csc")
    rhs = np.concatenate([system.f, np.zeros(npr + nc)])
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            lu = spla.splu(K)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularSystem(str(exc)) from exc
    x = lu.solve(rhs)
    for _ in range(refinement_steps):
        x = x + lu.solve(rhs - K @ x)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    u, p, lam = x[:nu], x[nu:nu + npr], x[nu + npr:]
    fn = max(np.linalg.norm(system.f), 1e-300)
    momentum = np.linalg.norm(A @ u - B.T @ p - system.f)
    mass = np.linalg.norm(-B @ u + C.T @ lam)
    diagnostics = {
        "constraint_rank": rank,
        "dropped_rows": dropped,
        "momentum_residual": float(momentum / fn),
        "mass_residual": float(mass / max(np.linalg.norm(B @ u), np.linalg.norm(u), 1e-300)),
        "constraint_residual": float(np.abs(C @ p).max(initial=0.0)
                                     / max(np.abs(p).max(initial=0.0), 1e-300)),
    }
    return DiscreteSolution(u, p, lam, system, diagnostics)


def _field_at_quadrature(system, u_full, data):
    """Values of u and grad u at quadrature points, shapes (nt,nq,2) and (nt,nq,2,2).

    ``grad[..., c, d]`` is d u_c / d x_d.
    """
    U = u_full[system.velocity.cell_dofs()]  # (nt, a, c)
    vals = np.einsum("qa,tac->tqc", data.phi, U)
    grads = np.einsum("tqad,tac->tqcd", data.dphi, U)
    return vals, grads


def _error_data(system, bump):
    rule = gauss_triangle(2 * system.k + bump)
    return element_data(system.mesh, system.velocity, system.pressure, rule)


def divergence_norm(system: SaddleSystem, u_full, bump: int = 0) -> float:
    """||div u||_{L2} of a full velocity dof vector by elementwise quadrature."""
    data = system.data if bump == 0 else _error_data(system, bump)
    _, g = _field_at_quadrature(system, u_full, data)
    div = g[..., 0, 0] + g[..., 1, 1]
    return float(np.sqrt(np.sum(data.jxw * div**2)))


def gradient_norm(system: SaddleSystem, u_full, bump: int = 0) -> float:
    data = system.data if bump == 0 else _error_data(system, bump)
    _, g = _field_at_quadrature(system, u_full, data)
    return float(np.sqrt(np.sum(data.jxw[..., None, None] * g**2)))


def pressure_at_quadrature(system, p, data):
    return np.einsum("qm,tm->tq", data.psi, p[system.pressure.cell_dofs()])


def error_norms(system: SaddleSystem, u_full, p, exact_grad_u, exact_p,
                bump: int = 6) -> tuple:
    """(||grad(u - u_S)||, ||p - p_M||) with closed-form exact fields.

    ``exact_grad_u(x, y)`` returns a (..., 2, 2) array with entry [c, d] =
    d u_c / d x_d.
    """
    data = _error_data(system, bump)
    _, g = _field_at_quadrature(system, u_full, data)
    x, y = data.x[..., 0], data.x[..., 1]
    eg = exact_grad_u(x, y) - g
    ep = exact_p(x, y) - pressure_at_quadrature(system, p, data)
    w = data.jxw
    return (float(np.sqrt(np.sum(w[..., None, None] * eg**2))),
            float(np.sqrt(np.sum(w * ep**2))))


@dataclass
class InfSupEstimate:
    beta: float
    mu_min: float
    n_velocity: int
    n_pressure: int


def constrained_basis(system: SaddleSystem) -> np.ndarray:
    """Orthonormal basis of ker C from a pivoted QR of C^T."""
    ct = system.C.T.toarray()
    q, r, _ = scipy.linalg.qr(ct, pivoting=True)
    d = np.abs(np.diag(r))
    rank = int((d > 1e-10 * d[0]).sum()) if len(d) and d[0] > 0 else 0
    return q[:, rank:]


def estimate_infsup(system: SaddleSystem, basis: np.ndarray | None = None) -> InfSupEstimate:
    """beta = sqrt of the smallest eigenvalue of Z^T B H^{-1} B^T Z x = mu Z^T Mp Z x.

    H = A + Mu is the H^1 Gram matrix on free velocity dofs.  Dense: meant
    for meshes with at most a few thousand pressure dofs.
    """
    Z = constrained_basis(system) if basis is None else basis
    if Z.shape[1] == 0:
        raise EmptyPressureSpace("constraints leave no pressure dofs")
    H = (system.A + system.Mu).toarray()
    Bt = system.B.T.toarray()
    try:
        cho = scipy.linalg.cho_factor(H)
        BZ = Bt @ Z
        S = BZ.T @ scipy.linalg.cho_solve(cho, BZ)
        M = Z.T @ system.Mp.toarray() @ Z
        S = 0.5 * (S + S.T)
        M = 0.5 * (M + M.T)
        mu = scipy.linalg.eigh(S, M, eigvals_only=True, subset_by_index=[0, 0])[0]
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigSolverFailure(str(exc)) from exc
    mu = max(float(mu), 0.0)
    return InfSupEstimate(float(np.sqrt(mu)), mu, H.shape[0], Z.shape[1])
