import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pwstokes.errors import (DegenerateTriangle, IndexOutOfRange, MeshFormatError,
                             NonConforming, OutOfRange)
from pwstokes.mesh import (CRISS_CROSS_CENTER, build_mesh, criss_cross_mesh, min_angle,
                           min_outer_angle, outer_angles, read_mesh, red_refine,
                           shape_regularity, vertex_patch, write_mesh)
from pwstokes.singularity import theta_of_vertex

REF = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]


def test_single_triangle_edges():
    m = build_mesh(REF, [(0, 1, 2)])
    assert m.n_boundary_edges == 3 and m.n_interior_edges == 0
    assert m.boundary_vertex.all()


def test_criss_cross_counts():
    m = criss_cross_mesh(0.0)
    assert (m.n_vertices, m.n_triangles) == (5, 4)
    assert m.n_interior_edges == 4 and m.n_boundary_edges == 4
    assert int((~m.boundary_vertex).sum()) == 1


def test_orientation_normalised():
    m = build_mesh(REF, [(0, 2, 1)])
    assert m.areas()[0] == pytest.approx(0.5)


def test_partial_edge_is_nonconforming():
    # big triangle next to two small ones sharing only half of its edge
    v = [(0, 0), (2, 0), (0, 2), (2, 2), (1, 1)]
    with pytest.raises(NonConforming):
        build_mesh(v, [(0, 1, 2), (1, 3, 4)])


def test_overlap_and_overuse_rejected():
    v = [(0, 0), (1, 0), (0, 1), (0.2, 0.2), (0.3, -1)]
    with pytest.raises(NonConforming):
        build_mesh(v, [(0, 1, 2), (0, 1, 3)])
    with pytest.raises(NonConforming):
        build_mesh(v + [(0.5, 0.9)], [(0, 1, 2), (0, 1, 4), (0, 1, 5)])


def test_degenerate_and_index_errors():
    with pytest.raises(DegenerateTriangle):
        build_mesh([(0, 0), (1, 0), (2, 0)], [(0, 1, 2)])
    with pytest.raises(DegenerateTriangle):
        build_mesh(REF, [(0, 1, 1)])
    with pytest.raises(IndexOutOfRange):
        build_mesh(REF, [(0, 1, 3)])


def test_tiny_perturbation_is_valid():
    m = criss_cross_mesh(1e-8)
    assert m.vertices[CRISS_CROSS_CENTER, 0] == 0.5 + 1e-8


def test_criss_cross_center():
    assert np.allclose(criss_cross_mesh(0.01).vertices[4], (0.51, 0.5))
    p = vertex_patch(criss_cross_mesh(0.0), 4)
    assert p.n == 4 and not p.is_boundary
    assert np.allclose(p.angles, math.pi / 2)
    with pytest.raises(OutOfRange):
        criss_cross_mesh(0.5)
    with pytest.raises(OutOfRange):
        criss_cross_mesh(-0.1)


def test_corner_patch_of_criss_cross():
    # each square corner belongs to two triangles (both diagonals end there)
    p = vertex_patch(criss_cross_mesh(0.0), 0)
    assert p.is_boundary and p.n == 2
    assert np.allclose(p.angles, math.pi / 4)


def test_single_triangle_corner_patch():
    p = vertex_patch(build_mesh(REF, [(0, 1, 2)]), 1)
    assert p.is_boundary and p.n == 1


def test_red_refine_counts():
    one = red_refine(build_mesh(REF, [(0, 1, 2)]))
    assert (one.n_triangles, one.n_vertices) == (4, 6)
    assert np.allclose(one.areas(), 0.125)
    cc = criss_cross_mesh(0.01)
    assert red_refine(cc).n_triangles == 16
    assert red_refine(cc, 2).n_triangles == 64


def test_refined_midpoint_boundary_patch():
    m = red_refine(criss_cross_mesh(0.0))
    z = int(np.flatnonzero(np.all(np.isclose(m.vertices, (0.5, 0.0)), axis=1))[0])
    p = vertex_patch(m, z)
    assert p.is_boundary and p.n == 3


def test_theta_survives_refinement():
    cc = criss_cross_mesh(0.01)
    coarse = theta_of_vertex(vertex_patch(cc, 4))
    fine = red_refine(cc, 2)
    assert abs(theta_of_vertex(vertex_patch(fine, 4)) - coarse) <= 1e-13
    for z in range(cc.n_vertices):
        assert abs(theta_of_vertex(vertex_patch(fine, z))
                   - theta_of_vertex(vertex_patch(cc, z))) <= 1e-13


def test_shape_regularity():
    eq = build_mesh([(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)], [(0, 1, 2)])
    assert shape_regularity(eq) == pytest.approx(math.sqrt(3), rel=1e-14)
    cc = criss_cross_mesh(0.0)
    # right isosceles: legs sqrt(2)/2, area 1/4, rho = 2 area / semiperimeter
    rho = 2 * 0.25 / ((1 + math.sqrt(2)) / 2)
    assert shape_regularity(cc) == pytest.approx(1 / rho, rel=1e-14)
    assert shape_regularity(red_refine(cc, 2)) == pytest.approx(shape_regularity(cc), rel=1e-12)


def test_outer_angles():
    cc = criss_cross_mesh(0.0)
    oa = outer_angles(cc)
    assert all(a == pytest.approx(1.5 * math.pi) for a in oa.values())
    assert min_outer_angle(red_refine(cc)) == pytest.approx(math.pi)
    # L-shape: reentrant corner at (1, 1)
    v = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2)]
    tris = [(0, 1, 4), (0, 4, 3), (1, 2, 5), (1, 5, 4), (3, 4, 7), (3, 7, 6)]
    L = build_mesh(v, tris)
    assert outer_angles(L)[4] == pytest.approx(math.pi / 2)
    assert min_outer_angle(L) == pytest.approx(math.pi / 2)


def test_min_angle():
    assert min_angle(criss_cross_mesh(0.0)) == pytest.approx(math.pi / 4)


def test_mesh_file_round_trip(tmp_path):
    m = red_refine(criss_cross_mesh(1e-3))
    path = tmp_path / "m.txt"
    write_mesh(m, path)
    back = read_mesh(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)


def test_mesh_reader_rejects(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3 1\n0 0 1\n1 0 1\n0 1 1\n")
    with pytest.raises(MeshFormatError):
        read_mesh(path)
    path.write_text("3 1\n0 0 1\n1 0 0\n0 1 1\n0 1 2\n")
    with pytest.raises(MeshFormatError):
        read_mesh(path)
    path.write_text("x y\n")
    with pytest.raises(MeshFormatError):
        read_mesh(path)


def test_edge_normals_boundary_outward():
    m = criss_cross_mesh(0.0)
    n = m.edge_normals()
    mid = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    out = mid - 0.5
    b = m.boundary_edge
    assert np.all(np.einsum("ij,ij->i", n[b], out[b]) > 0)


def perturbed_mesh(seed, amp):
    m = red_refine(criss_cross_mesh(0.0), 2)
    r = np.random.default_rng(seed)
    v = m.vertices.copy()
    inner = ~m.boundary_vertex
    v[inner] += r.uniform(-amp, amp, (int(inner.sum()), 2))
    return m.with_vertices(v)


@given(st.integers(0, 10**6), st.floats(0.0, 0.05))
def test_patch_invariants(seed, amp):
    m = perturbed_mesh(seed, amp)
    for z in range(m.n_vertices):
        p = vertex_patch(m, z)
        assert np.all((p.angles > 0) & (p.angles < math.pi))
        if p.is_boundary:
            assert p.angles.sum() < 2 * math.pi
        else:
            assert abs(p.angles.sum() - 2 * math.pi) <= 1e-12
        # consecutive triangles share the edge to rays[j+1]
        for j in range(p.n - (1 if p.is_boundary else 0)):
            a = set(m.triangles[p.triangles[j]].tolist())
            b = set(m.triangles[p.triangles[(j + 1) % p.n]].tolist())
            assert a & b == {z, p.rays[(j + 1) % len(p.rays)]}


@given(st.integers(0, 10**6))
def test_refine_keeps_conformity(seed):
    m = red_refine(perturbed_mesh(seed, 0.03))
    assert m.n_boundary_edges == 4 * 2**3
    assert np.all(m.areas() > 0)
