"""Singularity measure of mesh vertices and the alternating trace functional."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AllSingular, LengthMismatch
from .mesh import Mesh, vertex_patch


def theta_of_vertex(patch) -> float:
    """max |sin(theta_i + theta_{i+1})| over consecutive patch angles.

    Interior patches include the wrap pair (theta_N, theta_1); boundary
    patches do not, and a boundary vertex in a single triangle gets 0.
    """
    s, c = patch.sin, patch.cos
    if patch.is_boundary:
        if patch.n == 1:
            return 0.0
        pair = s[:-1] * c[1:] + c[:-1] * s[1:]
    else:
        s1, c1 = np.roll(s, -1), np.roll(c, -1)
        pair = s * c1 + c * s1
    return float(np.abs(pair).max())


def vertex_thetas(mesh: Mesh) -> np.ndarray:
    return np.array([theta_of_vertex(vertex_patch(mesh, z)) for z in range(mesh.n_vertices)])


def eta_critical_set(mesh: Mesh, eta: float, thetas=None) -> list:
    """Vertices with Theta(z) <= eta."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if thetas is None:
        thetas = vertex_thetas(mesh)
    return [int(z) for z in np.flatnonzero(thetas <= eta)]


def theta_min(mesh: Mesh, thetas=None) -> float:
    if thetas is None:
        thetas = vertex_thetas(mesh)
    positive = thetas[thetas > 0]
    if not len(positive):
        raise AllSingular("every vertex has Theta = 0")
    return float(positive.min())


def alternating_functional(patch, traces) -> float:
    """sum_l (-1)^l q|_{K_l}(z) with l counted from 1."""
    traces = np.asarray(traces, dtype=float)
    if traces.shape != (patch.n,):
        raise LengthMismatch(f"expected {patch.n} traces, got {traces.shape}")
    return float(alternating_signs(patch.n) @ traces)


def alternating_signs(n: int) -> np.ndarray:
    return np.where(np.arange(1, n + 1) % 2 == 0, 1.0, -1.0)


@dataclass
class SingularityReport:
    thetas: dict
    theta_min: float
    critical_set: list
    eta: float

    @classmethod
    def from_mesh(cls, mesh: Mesh, eta: float = 0.0) -> "SingularityReport":
        thetas = vertex_thetas(mesh)
        try:
            tmin = theta_min(mesh, thetas)
        except AllSingular:
            tmin = float("nan")
        return cls({z: float(t) for z, t in enumerate(thetas)}, tmin,
                   eta_critical_set(mesh, eta, thetas), eta)


def write_theta_csv(mesh: Mesh, path) -> None:
    """Per-vertex dump ``vertex_id,x,y,n_z,is_boundary,theta``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "x", "y", "n_z", "is_boundary", "theta"])
        for z in range(mesh.n_vertices):
            patch = vertex_patch(mesh, z)
            x, y = mesh.vertices[z]
            w.writerow([z, repr(float(x)), repr(float(y)), patch.n, int(patch.is_boundary),
                        repr(theta_of_vertex(patch))])
