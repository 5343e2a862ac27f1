"""Hybrid high-order discretization of Laplace source and eigenvalue problems
on polytopal meshes (intervals in 1d, polygons in 2d), with static
condensation in both directions and convergence-study drivers."""

__version__ = "0.1.0"

from .mesh import (  # noqa: F401
    PolytopalMesh,
    build_uniform_interval,
    build_uniform_square,
    build_triangular_square,
    build_lshape,
    build_hexagonal,
    build_disk,
    refine_uniform,
    load_mesh,
    save_mesh,
)
