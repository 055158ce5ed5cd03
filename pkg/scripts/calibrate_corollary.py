"""Calibrate the inverse-estimate constant of the patch-divergence check.

Draws random discrete velocities on near-singular criss-cross meshes and
prints the largest ratio sin^2(phi) |A_z(div v)| / (h^-1 k^2 Theta ||grad v||).
"""
import argparse

import numpy as np

from pwstokes.assembly import assemble_system
from pwstokes.mesh import criss_cross_mesh, red_refine
from pwstokes.singularity import vertex_thetas
from pwstokes.verify import check_patch_divergence_corollary


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for eps in (1e-2, 1e-4, 1e-6):
        for level in (0, 1):
            mesh = red_refine(criss_cross_mesh(eps), level)
            thetas = vertex_thetas(mesh)
            z = int(np.argmin(np.where(mesh.boundary_vertex, np.inf, thetas)))
            for k in (4, 5, 6):
                system = assemble_system(mesh, k)
                for _ in range(args.samples):
                    u = system.velocity.expand(rng.standard_normal(system.velocity.n_free))
                    lhs, rhs = check_patch_divergence_corollary(system, u, z, thetas[z], 1.0)
                    worst = max(worst, lhs / rhs)
            print(f"eps={eps:g} level={level} worst ratio so far {worst:.4f}")
    print(f"max ratio {worst:.4f}")


if __name__ == "__main__":
    main()
