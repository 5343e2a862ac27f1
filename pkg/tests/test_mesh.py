"""Mesh builders, derived faces, refinement and serialization."""

import json
import math

import numpy as np
import pytest

from hhoeig.mesh import (
    PolytopalMesh,
    build_disk,
    build_hexagonal,
    build_lshape,
    build_triangular_square,
    build_uniform_interval,
    build_uniform_square,
    load_mesh,
    refine_uniform,
    save_mesh,
)

ALL_2D_BUILDERS = [
    (build_uniform_square, 3, 1.0),
    (build_triangular_square, 3, 1.0),
    (build_lshape, 2, 3.0),
    (build_hexagonal, 1, 1.0),
    (build_disk, 1, 16.0 * math.sin(2.0 * math.pi / 32.0)),
]


@pytest.mark.parametrize("builder,arg,measure", ALL_2D_BUILDERS,
                         ids=["square", "tri-square", "lshape", "hex", "disk"])
def test_cell_measures_sum_to_domain_measure(builder, arg, measure):
    mesh = builder(arg)
    assert mesh.total_measure == pytest.approx(measure, rel=1e-12)


@pytest.mark.parametrize("builder,arg,measure", ALL_2D_BUILDERS,
                         ids=["square", "tri-square", "lshape", "hex", "disk"])
def test_euler_characteristic_simply_connected(builder, arg, measure):
    mesh = builder(arg)
    assert mesh.n_cells - mesh.n_faces + mesh.n_vertices == 1


@pytest.mark.parametrize("builder,arg,measure", ALL_2D_BUILDERS,
                         ids=["square", "tri-square", "lshape", "hex", "disk"])
def test_interface_normals_are_opposite_units(builder, arg, measure):
    mesh = builder(arg)
    for f in mesh.faces:
        for n in f.normals:
            assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)
        if not f.is_boundary:
            assert np.linalg.norm(f.normals[0] + f.normals[1]) < 1e-12


def test_interval_mesh_layout():
    mesh = build_uniform_interval(4)
    assert mesh.dim == 1
    assert mesh.n_cells == 4
    assert mesh.n_faces == 5
    assert len(mesh.boundary_faces()) == 2
    assert mesh.total_measure == pytest.approx(1.0)
    assert mesh.max_diameter == pytest.approx(0.25)
    # Point faces have unit measure by convention.
    assert all(f.measure == 1.0 for f in mesh.faces)
    # Outward normals: -1 at the left end of a cell, +1 at the right end.
    left = mesh.faces[0]
    assert left.is_boundary and left.normals[0][0] == -1.0


def test_square_mesh_counts():
    n = 4
    mesh = build_uniform_square(n)
    assert mesh.n_cells == n * n
    assert mesh.n_vertices == (n + 1) ** 2
    assert mesh.n_faces == 2 * n * (n + 1)
    assert len(mesh.boundary_faces()) == 4 * n
    assert mesh.max_diameter == pytest.approx(math.sqrt(2.0) / n)


def test_triangular_square_counts_and_shape():
    n = 5
    mesh = build_triangular_square(n)
    assert mesh.n_cells == 2 * n * n
    assert all(c.vertices.shape[0] == 3 for c in mesh.cells)
    assert all(c.measure == pytest.approx(0.5 / n ** 2) for c in mesh.cells)


def test_lshape_counts_and_reentrant_corner():
    n = 3
    mesh = build_lshape(n)
    assert mesh.n_cells == 6 * n * n
    assert mesh.total_measure == pytest.approx(3.0)
    # The corner vertex (1, 1) must exist; the excluded square's far corner must not.
    d_corner = np.linalg.norm(mesh.vertices - np.array([1.0, 1.0]), axis=1)
    assert d_corner.min() < 1e-14
    d_far = np.linalg.norm(mesh.vertices - np.array([2.0, 2.0]), axis=1)
    assert d_far.min() > 0.1


def test_refining_triangular_square_matches_doubled_resolution():
    coarse = refine_uniform(build_triangular_square(2))
    direct = build_triangular_square(4)
    assert coarse.n_cells == direct.n_cells
    assert coarse.total_measure == pytest.approx(direct.total_measure)
    cs = sorted(tuple(np.round(c.centroid, 12)) for c in coarse.cells)
    ds = sorted(tuple(np.round(c.centroid, 12)) for c in direct.cells)
    assert cs == ds


def test_refine_uniform_conserves_measure_and_splits_cells():
    mesh = build_lshape(2)
    fine = refine_uniform(mesh)
    assert fine.n_cells == 4 * mesh.n_cells
    assert fine.total_measure == pytest.approx(mesh.total_measure, rel=1e-12)

    interval = build_uniform_interval(3)
    fine1 = refine_uniform(interval)
    assert fine1.n_cells == 6
    assert fine1.total_measure == pytest.approx(1.0)


def test_refine_uniform_rejects_non_simplicial():
    with pytest.raises(ValueError, match="triangular"):
        refine_uniform(build_uniform_square(2))
    with pytest.raises(ValueError, match="triangular"):
        refine_uniform(build_hexagonal(0))


def test_hexagonal_levels_halve_mesh_size():
    h_prev = None
    for level in range(3):
        mesh = build_hexagonal(level)
        h = mesh.max_diameter
        if h_prev is not None:
            assert h <= 0.6 * h_prev
        h_prev = h
        # Clipped cells remain convex polygons with at least 3 vertices.
        assert min(c.vertices.shape[0] for c in mesh.cells) >= 3
        assert max(c.vertices.shape[0] for c in mesh.cells) <= 7


def test_disk_boundary_vertices_on_unit_circle_and_doubling():
    for level in range(3):
        mesh = build_disk(level)
        boundary_vertex_ids = set()
        for fi in mesh.boundary_faces():
            boundary_vertex_ids.update(int(v) for v in mesh.faces[fi].vertices)
        radii = np.linalg.norm(mesh.vertices[sorted(boundary_vertex_ids)], axis=1)
        assert np.allclose(radii, 1.0, atol=1e-14)
        assert len(boundary_vertex_ids) == 16 * 2 ** level


def test_disk_measure_error_quarters_per_level():
    err = [math.pi - build_disk(level).total_measure for level in (2, 3)]
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.02)


def test_mesh_json_roundtrip(tmp_path):
    for mesh in (build_uniform_interval(5), build_hexagonal(0)):
        path = tmp_path / "mesh.json"
        save_mesh(mesh, path)
        back = load_mesh(path)
        assert back.dim == mesh.dim
        assert back.n_cells == mesh.n_cells
        assert back.n_faces == mesh.n_faces
        assert np.array_equal(back.vertices, mesh.vertices)
        assert back.total_measure == pytest.approx(mesh.total_measure, rel=1e-15)


def test_load_mesh_rejects_malformed_input(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValueError, match="malformed"):
        load_mesh(path)

    path.write_text(json.dumps({"dim": 2, "vertices": [[0, 0], [1, 0], [1, 1]]}))
    with pytest.raises(ValueError, match="missing key"):
        load_mesh(path)

    path.write_text(json.dumps({"dim": 3, "vertices": [], "cells": []}))
    with pytest.raises(ValueError, match="dim"):
        load_mesh(path)

    # Vertex index out of range.
    path.write_text(json.dumps({"dim": 2,
                                "vertices": [[0, 0], [1, 0], [1, 1]],
                                "cells": [[0, 1, 7]]}))
    with pytest.raises(ValueError, match="out of range"):
        load_mesh(path)

    # Clockwise loop: negative area.
    path.write_text(json.dumps({"dim": 2,
                                "vertices": [[0, 0], [1, 0], [1, 1]],
                                "cells": [[0, 2, 1]]}))
    with pytest.raises(ValueError, match="counterclockwise"):
        load_mesh(path)

    # Repeated vertex inside a loop.
    path.write_text(json.dumps({"dim": 2,
                                "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
                                "cells": [[0, 1, 1, 2], [0, 2, 3]]}))
    with pytest.raises(ValueError, match="non-closed"):
        load_mesh(path)


def test_duplicate_vertices_rejected():
    verts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0 + 1e-14, 1.0]]
    with pytest.raises(ValueError, match="duplicate"):
        PolytopalMesh.from_cells(2, verts, [[0, 1, 2], [0, 2, 3]])


def test_unreferenced_vertex_rejected():
    verts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [5.0, 5.0]]
    with pytest.raises(ValueError, match="not referenced"):
        PolytopalMesh.from_cells(2, verts, [[0, 1, 2]])


def test_overlapping_interval_cells_rejected():
    verts = [[0.0], [1.0], [0.5]]
    with pytest.raises(ValueError):
        PolytopalMesh.from_cells(1, verts, [(0, 1), (2, 1)])


def test_vertices_are_read_only():
    mesh = build_uniform_interval(2)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 7.0
