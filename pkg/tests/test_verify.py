import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pwstokes.assembly import assemble_system
from pwstokes.errors import (ConditionViolated, DegenerateAngle, IncompatibleFields, NotCritical)
from pwstokes.manufactured import velocity
from pwstokes.mesh import criss_cross_mesh, red_refine, vertex_patch
from pwstokes.singularity import vertex_thetas
from pwstokes.verify import (COROLLARY_CONSTANT, FourDirectionPatch, QuadraticField,
                             alternating_compatible_traces, bubble_identity_deviations,
                             check_cond_bound, check_four_direction_inequality,
                             check_patch_divergence_corollary, check_rotation_identity,
                             compatibility_matrix, fan_mesh, four_direction_patch, random_fan,
                             random_four_direction_patch, run_verify_suite,
                             solve_patch_compatibility)

angles = st.floats(-10, 10)


def test_rotation_examples():
    assert check_rotation_identity(0.7, 0.7, 0.7) == 0.0
    assert check_rotation_identity(math.pi / 3, 0.0, math.pi / 6) <= 1e-14


@given(angles, angles, angles)
def test_rotation_identity(a, b, c):
    assert check_rotation_identity(a, b, c) <= 1e-12


def test_cond_examples():
    c, b = check_cond_bound(math.pi / 2)
    assert c == pytest.approx(1.0, abs=1e-14) and b == pytest.approx(2.0)
    c, b = check_cond_bound(math.pi / 6)
    assert c == pytest.approx(1 / math.tan(math.pi / 12), rel=1e-13) and b == pytest.approx(4.0)
    with pytest.raises(DegenerateAngle):
        check_cond_bound(0.0)


@given(st.floats(-20, 20))
def test_cond_bound(theta):
    if abs(math.sin(theta)) < 1e-3:
        return
    c, b = check_cond_bound(theta)
    # closed form from the eigenvalues 1 +- cos(theta) of M^T M
    exact = math.sqrt((1 + abs(math.cos(theta))) / (1 - abs(math.cos(theta))))
    assert c == pytest.approx(exact, rel=1e-9)
    assert c <= b * (1 + 1e-12)


def test_four_direction_equal_fields(rng):
    phi = np.array([0.1, 1.9, 3.0, 4.4])
    t = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    f = QuadraticField(np.zeros(2), rng.standard_normal((2, 2)), np.zeros((2, 2, 2)))
    p = FourDirectionPatch(t, np.diff(np.append(phi, phi[0] + 2 * math.pi)), (f,) * 4)
    lhs, rhs = check_four_direction_inequality(p)
    assert lhs <= 1e-15 and rhs > 0


def test_four_direction_exact_cross(rng):
    for _ in range(20):
        p = random_four_direction_patch(rng, 0.0)
        lhs, _ = check_four_direction_inequality(p)
        scale = sum(np.linalg.norm(f.G) for f in p.fields)
        assert lhs <= 1e-12 * scale
        assert p.theta_local <= 1e-14


def test_four_direction_rejects_incompatible(rng):
    p = random_four_direction_patch(rng, 0.1)
    bad = list(p.fields)
    bad[0] = QuadraticField(bad[0].value, bad[0].G + 1.0, bad[0].H)
    with pytest.raises(IncompatibleFields):
        check_four_direction_inequality(FourDirectionPatch(p.t, p.theta, tuple(bad)))


@given(st.integers(0, 10**6), st.sampled_from([None, 0.3, 1e-2, 1e-5, 1e-9]))
def test_four_direction_inequality(seed, pert):
    p = random_four_direction_patch(np.random.default_rng(seed), pert)
    assert p.gateaux_residual() <= 1e-12 * max(1.0, max(np.abs(f.G).max() for f in p.fields))
    assert abs(p.theta.sum() - 2 * math.pi) <= 1e-12
    for j in range(4):
        assert math.cos(p.theta[j]) == pytest.approx(p.t[j] @ p.t[(j + 1) % 4], abs=1e-12)
    lhs, rhs = check_four_direction_inequality(p)
    slack = 1e-12 * sum(np.linalg.norm(f.G) for f in p.fields)
    assert lhs <= rhs * (1 + 1e-9) + slack


def test_four_direction_patch_given_directions(rng):
    p = four_direction_patch([0.0, 1.0, 2.5, 4.0], rng, scale=3.0)
    assert p.gateaux_residual() <= 1e-11


def cross_patch():
    m = criss_cross_mesh(0.0)
    return m, vertex_patch(m, 4)


def test_delta_example():
    m, p = cross_patch()
    r = solve_patch_compatibility(m, p, [1, 2, 2, 1], True)
    assert np.allclose(r.delta, [0, 1, 1, 1])
    d = r.delta
    assert np.allclose([d[i] + d[(i + 1) % 4] for i in range(4)], [1, 2, 2, 1])
    assert r.residual <= 1e-12
    assert r.norm_ratio <= r.bound


def test_delta_zero_and_violation():
    m, p = cross_patch()
    assert np.all(solve_patch_compatibility(m, p, np.zeros(4), True).d == 0)
    with pytest.raises(ConditionViolated):
        solve_patch_compatibility(m, p, [1, 2, 3, 4], True)
    with pytest.raises(ValueError):
        solve_patch_compatibility(m, vertex_patch(m, 0), [1.0, 1.0], False)


@given(st.integers(0, 10**6), st.sampled_from([4, 6, 8]))
def test_delta_construction(seed, n):
    r = np.random.default_rng(seed)
    m = random_fan(r, n, min_gap=0.3)
    q = alternating_compatible_traces(r, n)
    res = solve_patch_compatibility(m, vertex_patch(m, 0), q, True)
    assert res.residual <= 1e-12
    assert res.norm_ratio <= res.bound


@given(st.integers(0, 10**6))
def test_noncritical_branch(seed):
    r = np.random.default_rng(seed)
    m = random_fan(r)
    p = vertex_patch(m, 0)
    q = r.standard_normal(p.n)
    res = solve_patch_compatibility(m, p, q, False)
    assert res.residual <= 1e-10
    assert res.norm_ratio <= res.bound


def test_matrix_sign_convention():
    # with clockwise normals the ansatz d_i = delta_i t_i gives delta_i + delta_{i+1}
    m, p = cross_patch()
    t = p.tangents(m)
    M = compatibility_matrix(t, p.sin)
    delta = np.array([0.3, -1.0, 2.0, 0.5])
    assert np.allclose(M @ (delta[:, None] * t).ravel(), delta + np.roll(delta, -1))


def test_corollary_examples(rng):
    m = criss_cross_mesh(0.0)
    s = assemble_system(red_refine(m, 2), 4)
    zero = np.zeros(s.velocity.n_dofs)
    assert check_patch_divergence_corollary(s, zero, 4, 0.0)[0] == 0.0
    lhs, _ = check_patch_divergence_corollary(s, s.velocity.interpolate(velocity), 4, 0.0)
    assert lhs <= 1e-12
    with pytest.raises(NotCritical):
        check_patch_divergence_corollary(assemble_system(criss_cross_mesh(0.1), 4), zero, 4, 0.0)


def test_corollary_ratio_bounded(rng):
    m = criss_cross_mesh(1e-6)
    s = assemble_system(m, 4)
    assert vertex_thetas(m)[4] <= 1e-5
    for _ in range(100):
        u = s.velocity.expand(rng.standard_normal(s.velocity.n_free))
        lhs, rhs = check_patch_divergence_corollary(s, u, 4, 1e-5)
        assert lhs <= rhs
        assert rhs > 0 and COROLLARY_CONSTANT > 0


@pytest.mark.parametrize("k", [2, 5, 8])
def test_bubble_identities_on_fans(k, rng):
    for _ in range(5):
        dev = bubble_identity_deviations(random_fan(rng), 0, k, rng)
        assert max(dev.values()) <= 1e-11


def test_suite_runs():
    rows = run_verify_suite(seed=3)
    assert all(r.passed for r in rows)
    assert [r.cases for r in rows] == [1000, 1000, 500, 1000]


def test_fan_mesh_star():
    m = fan_mesh(np.arange(5) * 2 * math.pi / 5)
    p = vertex_patch(m, 0)
    assert p.n == 5 and not p.is_boundary
