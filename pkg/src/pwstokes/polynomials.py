"""Reference-triangle machinery.

Barycentric convention on the reference triangle (0,0), (1,0), (0,1):
``lam = (1 - x - y, x, y)``.  Quadrature points are stored in barycentric
form so the same rule serves every affine image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import TriangleNotInPatch, UnsupportedDegree

MAX_QUADRATURE_DEGREE = 120


def zeta(k: int) -> int:
    """Binomial coefficient C(k+2, 2)."""
    return math.comb(k + 2, 2)


def jacobi_p02(k: int, t):
    """Jacobi polynomial P_k^{(0,2)} by the three-term recurrence in k."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    t = np.asarray(t, dtype=float)
    a, b = 0.0, 2.0
    p_prev = np.ones_like(t)
    if k == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = 0.5 * (a - b + (a + b + 2.0) * t)
    for n in range(2, k + 1):
        c = 2.0 * n + a + b
        a1 = 2.0 * n * (n + a + b) * (c - 2.0)
        a2 = (c - 1.0) * (a * a - b * b)
        a3 = (c - 2.0) * (c - 1.0) * c
        a4 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * c
        p_prev, p = p, ((a2 + a3 * t) * p - a4 * p_prev) / a1
    return p if p.ndim else float(p)


def weighted_moment(k: int) -> float:
    """|K|^{-1} * integral over K of P_k^{(0,2)}(1 - 2 lam_z); equals (-1)^k / zeta_k."""
    if k < 1:
        raise ValueError("k >= 1 required")
    return (-1) ** k / zeta(k)


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points and weights summing to one (area-normalised).

    ``integral over K of f = |K| * sum(weights * f(points))``.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]

    def integrate_reference(self, f) -> float:
        x, y = self.xy.T
        return 0.5 * float(self.weights @ f(x, y))


@lru_cache(maxsize=None)
def gauss_triangle(target_degree: int) -> QuadratureRule:
    """Collapsed (Duffy) Gauss-Jacobi x Gauss-Legendre rule, exact to ``target_degree``."""
    if target_degree < 0:
        raise ValueError("degree must be non-negative")
    if target_degree > MAX_QUADRATURE_DEGREE:
        raise UnsupportedDegree(f"quadrature degree {target_degree} > {MAX_QUADRATURE_DEGREE}")
    m = target_degree // 2 + 1
    v, wv = roots_jacobi(m, 1.0, 0.0)
    s, ws = roots_legendre(m)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    y = 0.5 * (1.0 + v)
    X = np.outer(1.0 - y, s).ravel()
    Y = np.repeat(y, m)
    W = np.outer(wv, ws).ravel() * 0.5  # sums to one
    pts = np.stack([1.0 - X - Y, X, Y], axis=1)
    return QuadratureRule(target_degree, pts, W)


def lattice(k: int) -> np.ndarray:
    """Integer barycentric multi-indices of the degree-k principal lattice.

    Order: the three vertices, then edge nodes grouped by edge (v0v1, v1v2,
    v2v0, each walking away from the first vertex), then interior nodes.
    """
    if k == 0:
        return np.zeros((1, 3), dtype=int)
    verts = [(k, 0, 0), (0, k, 0), (0, 0, k)]
    edges = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        for s in range(1, k):
            idx = [0, 0, 0]
            idx[a], idx[b] = k - s, s
            edges.append(tuple(idx))
    inner = [(k - i - j, i, j) for j in range(1, k) for i in range(1, k - j) if k - i - j > 0]
    return np.array(verts + edges + inner, dtype=int)


class ReferenceBasis:
    """Nodal Lagrange basis of degree k on the equispaced principal lattice.

    Evaluated through the product formula
    ``phi_alpha = prod_m R_{alpha_m}(lam_m)`` with
    ``R_a(s) = prod_{j<a} (k s - j) / (j + 1)``, so no Vandermonde inverse is
    needed.  Swap ``lattice`` for a warped node set to change the nodes.
    """

    def __init__(self, k: int):
        if k < 0:
            raise ValueError("degree must be non-negative")
        self.k = k
        self.multi = lattice(k)
        self.nodes = self.multi / k if k else np.full((1, 3), 1.0 / 3.0)

    def __len__(self):
        return len(self.multi)

    def _factors(self, lam):
        k = self.k
        lam = np.atleast_2d(lam)
        n = len(lam)
        R = np.ones((k + 1, n, 3))
        dR = np.zeros((k + 1, n, 3))
        for a in range(1, k + 1):
            g = (k * lam - (a - 1)) / a
            R[a] = R[a - 1] * g
            dR[a] = dR[a - 1] * g + R[a - 1] * (k / a)
        return R, dR

    def eval(self, lam) -> np.ndarray:
        """Basis values, shape (npoints, ndofs)."""
        R, _ = self._factors(lam)
        al = self.multi
        return R[al[:, 0], :, 0].T * R[al[:, 1], :, 1].T * R[al[:, 2], :, 2].T

    def grad(self, lam) -> np.ndarray:
        """Reference gradients d/dx, d/dy, shape (npoints, ndofs, 2)."""
        R, dR = self._factors(lam)
        al = self.multi
        f = [R[al[:, m], :, m].T for m in range(3)]
        df = [dR[al[:, m], :, m].T for m in range(3)]
        dl = [df[0] * f[1] * f[2], f[0] * df[1] * f[2], f[0] * f[1] * df[2]]
        # lam = (1 - x - y, x, y)
        return np.stack([dl[1] - dl[0], dl[2] - dl[0]], axis=-1)


def patch_bubble(mesh, patch, k: int, triangle: int, bary) -> np.ndarray:
    """Values of b_{k,z} on ``triangle`` at barycentric points.

    ``bary`` is ordered like ``mesh.triangles[triangle]``.  On the j-th patch
    triangle (j counted from 1) the function is
    ``(-1)^j / |K_j| * P_k^{(0,2)}(1 - 2 lam_z)``.
    """
    if triangle not in patch.triangles:
        raise TriangleNotInPatch(f"triangle {triangle} not in patch of vertex {patch.center}")
    j = patch.triangles.index(triangle) + 1
    local = int(np.flatnonzero(mesh.triangles[triangle] == patch.center)[0])
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    area = float(mesh.areas()[triangle])
    return (-1) ** j / area * jacobi_p02(k, 1.0 - 2.0 * bary[:, local])


def eval_patch_bubble(mesh, patch, k: int, triangle: int, point) -> float:
    return float(patch_bubble(mesh, patch, k, triangle, point)[0])
