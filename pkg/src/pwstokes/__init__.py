"""Scott-Vogelius Stokes solver with alternating pressure constraints at nearly singular vertices."""
from .assembly import SaddleSystem, assemble_system
from .mesh import Mesh, build_mesh, criss_cross_mesh, red_refine, vertex_patch
from .singularity import eta_critical_set, theta_of_vertex, vertex_thetas
from .solve import error_norms, divergence_norm, estimate_infsup, solve_stokes

__all__ = [
    "Mesh", "SaddleSystem", "assemble_system", "build_mesh", "criss_cross_mesh",
    "divergence_norm", "error_norms", "estimate_infsup", "eta_critical_set", "red_refine",
    "solve_stokes", "theta_of_vertex", "vertex_patch", "vertex_thetas",
]
