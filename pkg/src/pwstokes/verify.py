"""Randomised numerical checks of the geometric lemmas behind the element.

Every ``check_*`` function returns the quantities on both sides of the
inequality or identity it tests; the caller (tests, the ``verify`` CLI
mode) decides pass/fail against its tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (ConditionViolated, DegenerateAngle, IncompatibleFields,
                     InfeasibleSystem, NotCritical)
from .mesh import Mesh, build_mesh, min_angle, vertex_patch
from .polynomials import ReferenceBasis, gauss_triangle, patch_bubble, zeta
from .singularity import alternating_functional, alternating_signs, theta_of_vertex

SQRT8 = math.sqrt(8.0)

# C_inv of the patch-divergence corollary, calibrated once with
# scripts/calibrate_corollary.py (max observed ratio 0.27) and frozen
COROLLARY_CONSTANT = 1.0


def rotation(theta) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def check_rotation_identity(alpha: float, beta: float, gamma: float) -> float:
    """Max entry of sin(a-b)R(g) - sin(g-b)R(a) - sin(a-g)R(b)."""
    d = (math.sin(alpha - beta) * rotation(gamma)
         - math.sin(gamma - beta) * rotation(alpha)
         - math.sin(alpha - gamma) * rotation(beta))
    return float(np.abs(d).max())


def check_cond_bound(theta: float) -> tuple:
    """(cond_2 of the unit-column matrix (t1, t2) at angle theta, 2/|sin theta|)."""
    s = math.sin(theta)
    if abs(s) < 1e-12:
        raise DegenerateAngle(f"|sin({theta})| < 1e-12")
    M = np.array([[1.0, math.cos(theta)], [0.0, s]])
    sv = np.linalg.svd(M, compute_uv=False)
    return float(sv[0] / sv[-1]), 2.0 / abs(s)


@dataclass(frozen=True)
class QuadraticField:
    """v(x) = value + G (x - z) + 1/2 H[c](x - z, x - z) for each component c."""

    value: np.ndarray   # (2,)
    G: np.ndarray       # (2, 2), G[c, d] = d v_c / d x_d at z
    H: np.ndarray       # (2, 2, 2), symmetric in the last two axes

    def gradient(self, dx) -> np.ndarray:
        return self.G + np.einsum("cde,e->cd", self.H, np.asarray(dx, dtype=float))

    def divergence(self, dx=(0.0, 0.0)) -> float:
        return float(np.trace(self.gradient(dx)))


@dataclass(frozen=True)
class FourDirectionPatch:
    """Four counterclockwise unit directions around z with one field per sector.

    ``fields[j]`` lives between ``t[j]`` and ``t[j+1]``; ``theta[j]`` is the
    counterclockwise angle from ``t[j]`` to ``t[j+1]`` (cyclic, sum 2 pi).
    """

    t: np.ndarray
    theta: np.ndarray
    fields: tuple

    def gateaux_residual(self) -> float:
        """max_j |d/dt_j (v_{j-1} - v_j)(z)| with v_0 = v_4."""
        res = 0.0
        for j in range(4):
            diff = self.fields[j - 1].G - self.fields[j].G
            res = max(res, float(np.abs(diff @ self.t[j]).max()))
        return res

    @property
    def theta_local(self) -> float:
        th = self.theta
        return max(abs(math.sin(th[0] + th[1])), abs(math.sin(th[1] + th[2])))


def _compatibility_operator(t) -> np.ndarray:
    """Linear map from the 4 stacked gradients (16 numbers) to the 8 Gateaux jumps."""
    L = np.zeros((8, 16))
    for j in range(4):
        prev = (j - 1) % 4
        for c in range(2):
            for d in range(2):
                L[2 * j + c, 4 * prev + 2 * c + d] += t[j, d]
                L[2 * j + c, 4 * j + 2 * c + d] -= t[j, d]
    return L


def four_direction_patch(directions, rng, scale: float = 1.0) -> FourDirectionPatch:
    """Random sector fields satisfying the Gateaux matching along each direction.

    The gradients are drawn in the null space of the matching conditions;
    the constant and quadratic parts are unconstrained and random.
    """
    phi = np.asarray(directions, dtype=float)
    t = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    theta = np.diff(np.append(phi, phi[0] + 2 * math.pi))
    N = scipy.linalg.null_space(_compatibility_operator(t))
    g = N @ rng.standard_normal(N.shape[1]) * scale
    fields = []
    for j in range(4):
        H = rng.standard_normal((2, 2, 2))
        H = 0.5 * (H + H.transpose(0, 2, 1))
        fields.append(QuadraticField(rng.standard_normal(2), g[4 * j:4 * j + 4].reshape(2, 2), H))
    patch = FourDirectionPatch(t, theta, tuple(fields))
    if patch.gateaux_residual() > 1e-12 * max(1.0, scale):
        raise IncompatibleFields("constructed fields violate the matching conditions")
    return patch


def random_four_direction_patch(rng, perturbation: float | None = None) -> FourDirectionPatch:
    """Perturbed cross (``perturbation`` set) or a generic random fan."""
    if perturbation is None:
        while True:
            cuts = np.sort(rng.uniform(0, 2 * math.pi, 4))
            gaps = np.diff(np.append(cuts, cuts[0] + 2 * math.pi))
            if gaps.min() > 0.15 and gaps.max() < math.pi - 0.15:
                break
        phi = cuts
    else:
        phi = (rng.uniform(0, 2 * math.pi) + np.arange(4) * math.pi / 2
               + rng.uniform(-perturbation, perturbation, 4))
    return four_direction_patch(phi, rng)


def check_four_direction_inequality(patch: FourDirectionPatch) -> tuple:
    """(mu |sin theta_1| |sum_j (-1)^j div v_j(z)|, sqrt(8) Theta sum_j ||grad v_j(z)||)."""
    if patch.gateaux_residual() > 1e-12 * max(1.0, max(np.abs(f.G).max() for f in patch.fields)):
        raise IncompatibleFields("Gateaux derivatives do not match at z")
    th = patch.theta
    mu = min(abs(math.sin(th[1])), abs(math.sin(th[3])))
    alt = sum((-1) ** (j + 1) * np.trace(f.G) for j, f in enumerate(patch.fields))
    lhs = mu * abs(math.sin(th[0])) * abs(alt)
    rhs = SQRT8 * patch.theta_local * sum(np.linalg.norm(f.G) for f in patch.fields)
    return float(lhs), float(rhs)


def fan_mesh(directions, radii=None) -> Mesh:
    """Closed star of triangles around the origin with the given ray directions.

    Consecutive directions must be less than pi apart (counterclockwise).
    """
    phi = np.asarray(directions, dtype=float)
    r = np.ones(len(phi)) if radii is None else np.asarray(radii, dtype=float)
    pts = np.vstack([[0.0, 0.0], np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)])
    n = len(phi)
    tris = [(0, 1 + j, 1 + (j + 1) % n) for j in range(n)]
    return build_mesh(pts, tris)


@dataclass
class CompatibilityResult:
    d: np.ndarray           # (N, 2) edge vectors
    delta: np.ndarray | None
    residual: float
    norm_ratio: float       # sum ||d||^2 / sum q^2
    bound: float            # branch constant the ratio must stay below


def compatibility_matrix(tangents, sin_theta) -> np.ndarray:
    """Rows i: <d_i, n_{i+1}> - <d_{i+1}, n_i>, divided by sin theta_i.

    ``n_i`` is the clockwise rotation of ``t_i``; with this orientation the
    ansatz d_i = delta_i t_i reduces row i to delta_i + delta_{i+1}.
    """
    t = np.asarray(tangents, dtype=float)
    n = np.stack([t[:, 1], -t[:, 0]], axis=1)
    N = len(t)
    M = np.zeros((N, 2 * N))
    for i in range(N):
        nxt = (i + 1) % N
        M[i, 2 * i:2 * i + 2] += n[nxt] / sin_theta[i]
        M[i, 2 * nxt:2 * nxt + 2] -= n[i] / sin_theta[i]
    return M


def solve_patch_compatibility(mesh: Mesh, patch, traces, eta_critical: bool,
                              tol: float = 1e-12) -> CompatibilityResult:
    """Edge vectors d_i solving q|_{K_i}(z) sin theta_i = <d_i, n_{i+1}> - <d_{i+1}, n_i>.

    Critical branch: explicit d_i = delta_i t_i with delta_1 = 0 and
    delta_{i+1} = sum_{j<=i} (-1)^{i-j} q_j, which closes cyclically exactly
    when the alternating sum of the traces vanishes.  Otherwise: minimum-norm
    least squares, checked against 2 (1 + N / xi)^2 with
    xi = sum_i |sin(theta_i + theta_{i+1})|.
    """
    if patch.is_boundary:
        raise ValueError("compatibility system is implemented for interior patches")
    q = np.asarray(traces, dtype=float)
    N = patch.n
    t = patch.tangents(mesh)
    M = compatibility_matrix(t, patch.sin)
    qnorm2 = float(q @ q)
    scale = max(1.0, float(np.abs(q).max(initial=0.0)))
    if eta_critical:
        a = alternating_functional(patch, q)
        if abs(a) > tol * scale * N:
            raise ConditionViolated(f"alternating trace sum {a:.3e} != 0")
        delta = np.zeros(N)
        for i in range(1, N):
            delta[i] = sum((-1) ** (i - 1 - j) * q[j] for j in range(i))
        d = delta[:, None] * t
        bound = float(N * N)
    else:
        delta = None
        d = np.linalg.lstsq(M, q, rcond=None)[0].reshape(N, 2)
        s, c = patch.sin, patch.cos
        xi = float(np.abs(s * np.roll(c, -1) + c * np.roll(s, -1)).sum())
        bound = 2.0 * (1.0 + N / xi) ** 2 if xi > 0 else math.inf
    residual = float(np.abs(M @ d.ravel() - q).max(initial=0.0))
    if not eta_critical and residual > 1e-10 * scale:
        raise InfeasibleSystem(f"least-squares residual {residual:.3e}")
    ratio = float((d**2).sum() / qnorm2) if qnorm2 > 0 else 0.0
    return CompatibilityResult(d, delta, residual, ratio, bound)


def divergence_traces(mesh: Mesh, velocity, u_full, z: int, patch=None) -> np.ndarray:
    """div v|_{K_j}(z) for the patch triangles in patch order."""
    patch = vertex_patch(mesh, z) if patch is None else patch
    p = mesh.vertices
    out = []
    for tri in patch.triangles:
        verts = mesh.triangles[tri]
        lam = (verts == z).astype(float)[None, :]
        J = np.stack([p[verts[1]] - p[verts[0]], p[verts[2]] - p[verts[0]]], axis=1)
        ref = velocity.basis.grad(lam)[0]           # (a, 2)
        phys = ref @ np.linalg.inv(J)               # rows: grad phi_a
        U = u_full[velocity.cell_dofs()[tri]]       # (a, c)
        out.append(float(np.sum(phys * U)))
    return np.array(out)


def patch_gradient_norm(mesh: Mesh, system, u_full, patch) -> float:
    from .solve import _field_at_quadrature
    _, g = _field_at_quadrature(system, u_full, system.data)
    w = system.data.jxw
    tris = list(patch.triangles)
    return float(np.sqrt(np.sum(w[tris, :, None, None] * g[tris] ** 2)))


def check_patch_divergence_corollary(system, u_full, z: int, eta: float,
                                     constant: float = COROLLARY_CONSTANT) -> tuple:
    """(sin^2(phi_T) |A_z(div v)|, C_inv h_z^{-1} k^2 eta ||grad v||_{L2(omega_z)})."""
    mesh = system.mesh
    patch = vertex_patch(mesh, z)
    if theta_of_vertex(patch) > eta:
        raise NotCritical(f"vertex {z} has Theta > eta = {eta}")
    traces = divergence_traces(mesh, system.velocity, u_full, z, patch)
    lhs = math.sin(min_angle(mesh)) ** 2 * abs(float(alternating_signs(patch.n) @ traces))
    h_z = float(mesh.diameters()[list(patch.triangles)].max())
    k = system.k
    rhs = constant * k**2 * eta * patch_gradient_norm(mesh, system, u_full, patch) / h_z
    return lhs, rhs


def bubble_identity_deviations(mesh: Mesh, z: int, k: int, rng) -> dict:
    """Max deviations of the patch-bubble vertex values, moments and q(z)-reproduction.

    Vertex values are measured relative to zeta_k / |K_j|; the moment
    identities are absolute (they are O(1) by construction).
    """
    patch = vertex_patch(mesh, z)
    rule = gauss_triangle(2 * k)
    basis = ReferenceBasis(k)
    zk = zeta(k)
    areas = mesh.areas()
    dev = {"vertex_values": 0.0, "moment": 0.0, "reproduction": 0.0}
    for j, t in enumerate(patch.triangles, start=1):
        K = float(areas[t])
        local = int(np.flatnonzero(mesh.triangles[t] == z)[0])
        vals = patch_bubble(mesh, patch, k, t, np.eye(3))
        expect = np.ones(3)
        expect[local] = (-1) ** k * zk
        expect *= (-1) ** j / K
        dev["vertex_values"] = max(dev["vertex_values"],
                                   float(np.abs(vals - expect).max() * K / zk))
        b = patch_bubble(mesh, patch, k, t, rule.points)
        moment = K * float(rule.weights @ b)
        dev["moment"] = max(dev["moment"], abs(moment - (-1) ** (j + k) / zk))
        coef = rng.standard_normal(len(basis))
        q = basis.eval(rule.points) @ coef
        qz = float((basis.eval(np.eye(3)[local:local + 1]) @ coef)[0])
        bq = K * float(rule.weights @ (b * q))
        dev["reproduction"] = max(dev["reproduction"],
                                  abs(bq - qz * moment) / max(1.0, abs(qz * moment)))
    return dev


def check_gram_bound(vertices, k: int, coefficients) -> tuple:
    """(|K|^-1 sum c_z^2, 12/7 min_C ||sum c_z b_{k,z} - C||^2) on one triangle."""
    mesh = build_mesh(np.asarray(vertices, dtype=float), [(0, 1, 2)])
    rule = gauss_triangle(2 * k)
    K = float(mesh.areas()[0])
    c = np.asarray(coefficients, dtype=float)
    q = sum(c[z] * patch_bubble(mesh, vertex_patch(mesh, z), k, 0, rule.points)
            for z in range(3))
    mean = float(rule.weights @ q)
    dist2 = K * float(rule.weights @ (q - mean) ** 2)
    return float(c @ c) / K, 12.0 / 7.0 * dist2


def random_triangle(rng, min_angle_deg: float = 5.0) -> np.ndarray:
    while True:
        p = rng.uniform(-1.0, 1.0, (3, 2))
        e = [p[(i + 1) % 3] - p[i] for i in range(3)]
        area = 0.5 * abs(e[0][0] * e[1][1] - e[0][1] * e[1][0])
        if area < 1e-3:
            continue
        angs = []
        for i in range(3):
            a, b = p[(i + 1) % 3] - p[i], p[(i + 2) % 3] - p[i]
            angs.append(math.degrees(math.acos(np.clip(a @ b / np.linalg.norm(a)
                                                       / np.linalg.norm(b), -1, 1))))
        if min(angs) >= min_angle_deg:
            return p


def random_fan(rng, n: int | None = None, min_gap: float = 0.2):
    """Random interior star (mesh, centre id 0) with ``n`` triangles."""
    n = int(rng.integers(3, 9)) if n is None else n
    while True:
        gaps = rng.uniform(0.5, 1.5, n)
        gaps *= 2 * math.pi / gaps.sum()
        if gaps.min() > min_gap and gaps.max() < math.pi - min_gap:
            break
    phi = rng.uniform(0, 2 * math.pi) + np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    return fan_mesh(phi, rng.uniform(0.5, 1.5, n))


def alternating_compatible_traces(rng, n: int) -> np.ndarray:
    """Random traces with the last value fixed so the alternating sum vanishes."""
    q = rng.standard_normal(n)
    s = alternating_signs(n)
    q[-1] = -(s[:-1] @ q[:-1]) / s[-1]
    return q


@dataclass
class SuiteRow:
    name: str
    cases: int
    worst: float      # worst deviation, or worst lhs/rhs ratio
    limit: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.worst) and self.worst <= self.limit)


def run_verify_suite(seed: int = 12345, tol: float = 1e-12, scale: int = 1) -> list:
    """Randomised lemma checks; ``scale`` multiplies the case counts."""
    import time

    rng = np.random.default_rng(seed)
    rows = []

    def timed(name, cases, limit, fn):
        t0 = time.perf_counter()
        worst = fn()
        rows.append(SuiteRow(name, cases, worst, limit, time.perf_counter() - t0))

    n = 1000 * scale
    timed("rotation identity", n, tol,
          lambda: max(check_rotation_identity(*rng.uniform(-10, 10, 3)) for _ in range(n)))

    def cond_cases():
        worst = 0.0
        done = 0
        while done < n:
            th = rng.uniform(-2 * math.pi, 2 * math.pi)
            if abs(math.sin(th)) < 1e-3:
                continue
            c, b = check_cond_bound(th)
            worst = max(worst, c / b)
            done += 1
        return worst
    timed("condition bound cond/(2/|sin|)", n, 1.0 + 1e-12, cond_cases)

    m = 500 * scale

    def four_direction():
        worst = 0.0
        for i in range(m):
            pert = (None, 0.3, 1e-2, 1e-4, 1e-8)[i % 5]
            patch = random_four_direction_patch(rng, pert)
            lhs, rhs = check_four_direction_inequality(patch)
            slack = tol * sum(np.linalg.norm(f.G) for f in patch.fields)
            worst = max(worst, max(lhs - slack, 0.0) / rhs if rhs > 0 else
                        (0.0 if lhs <= slack else math.inf))
        return worst
    timed("four-direction inequality lhs/rhs", m, 1.0 + 1e-9, four_direction)

    def delta_construction():
        worst = 0.0
        for i in range(n):
            nz = 4 if i % 2 == 0 else int(rng.choice([6, 8]))
            mesh = random_fan(rng, nz, min_gap=0.3)
            q = alternating_compatible_traces(rng, nz)
            res = solve_patch_compatibility(mesh, vertex_patch(mesh, 0), q, True, tol=tol)
            worst = max(worst, res.residual)
        return worst
    timed("delta construction residual", n, tol, delta_construction)
    return rows


def format_suite(rows) -> str:
    lines = [f"{'check':38s} {'cases':>6s} {'worst':>11s} {'limit':>11s} result"]
    for r in rows:
        lines.append(f"{r.name:38s} {r.cases:6d} {r.worst:11.3e} {r.limit:11.3e} "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
