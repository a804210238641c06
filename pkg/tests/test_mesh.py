import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA, REF_TRIANGLE, UNIT_SQUARE, regular_polygon
from polyvem.mesh import (
    MeshError,
    build_mesh,
    generate_annulus_quads,
    generate_half_annulus,
    generate_plate_with_hole,
    generate_rectangle_quads,
    load_mesh,
    polygon_geometry,
    save_mesh,
)


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


def euler_characteristic(mesh):
    return mesh.n_vertices - len(mesh.edges()) + mesh.n_cells


class TestLoadMesh:
    def test_unit_square(self, tmp_path):
        p = write_json(tmp_path / "sq.json", {
            "vertices": UNIT_SQUARE.tolist(), "cells": [[0, 1, 2, 3]], "boundary_tags": {}})
        mesh = load_mesh(p)
        assert mesh.n_vertices == 4 and mesh.n_cells == 1
        assert mesh.total_area() == pytest.approx(1.0, abs=1e-15)

    def test_cw_triangle_reoriented(self, tmp_path):
        p = write_json(tmp_path / "tri.json", {"vertices": REF_TRIANGLE.tolist(), "cells": [[0, 2, 1]]})
        mesh = load_mesh(p)
        assert mesh.element_geometry(0).area == pytest.approx(0.5)
        assert mesh.cells[0] == (1, 2, 0)

    def test_hanging_node_rejected(self, tmp_path):
        # right quad has an extra vertex on the shared edge x = 1
        verts = [[0, 0], [1, 0], [1, 1], [0, 1], [2, 0], [2, 1], [1, 0.5]]
        p = write_json(tmp_path / "hang.json", {"vertices": verts, "cells": [[0, 1, 2, 3], [1, 4, 5, 2, 6]]})
        with pytest.raises(MeshError, match="non-conforming"):
            load_mesh(p)

    def test_zero_area_cell_named(self, tmp_path):
        p = write_json(tmp_path / "flat.json", {
            "vertices": [[0, 0], [1, 0], [2, 0], [0, 1]], "cells": [[0, 1, 3], [0, 1, 2]]})
        with pytest.raises(MeshError, match="cell 1"):
            load_mesh(p)

    def test_duplicate_vertices(self):
        with pytest.raises(MeshError, match="duplicate"):
            build_mesh([[0, 0], [1, 0], [0, 1], [1e-15, 0]], [[0, 1, 2]])

    def test_parse_failure(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(MeshError, match="cannot parse"):
            load_mesh(p)

    def test_obj_like(self, tmp_path):
        p = tmp_path / "m.obj"
        p.write_text("v 0 0\nv 1 0\nv 1 1\nv 0 1\nv 2 0\nv 2 1\n"
                     "f 1 2 3 4\nf 2 5 6 3\ng left\nl 4 1\n")
        mesh = load_mesh(p, "obj-like")
        assert mesh.n_cells == 2
        assert mesh.boundary_tags["left"] == ((3, 0),)
        assert sum(len(e) for e in mesh.boundary_tags.values()) == 6

    def test_unknown_tag_edge(self):
        with pytest.raises(MeshError, match="not a boundary edge"):
            build_mesh(UNIT_SQUARE, [[0, 1, 2, 3]], {"x": [[0, 2]]})

    def test_round_trip_bit_identical(self, tmp_path, voronoi_mesh):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_mesh(voronoi_mesh, a)
        again = load_mesh(a)
        save_mesh(again, b)
        assert a.read_bytes() == b.read_bytes()
        np.testing.assert_array_equal(again.vertices, voronoi_mesh.vertices)
        assert again.cells == voronoi_mesh.cells


class TestElementGeometry:
    def test_unit_square(self):
        g = polygon_geometry(UNIT_SQUARE)
        assert g.m == 4 and g.area == pytest.approx(1.0)
        np.testing.assert_allclose(g.centroid, [0.5, 0.5])
        assert g.diameter == pytest.approx(math.sqrt(2.0))

    def test_triangle(self):
        g = polygon_geometry(REF_TRIANGLE)
        assert g.area == pytest.approx(0.5)
        np.testing.assert_allclose(g.centroid, [1 / 3, 1 / 3])

    def test_regular_hexagon(self):
        g = polygon_geometry(regular_polygon(6))
        assert g.area == pytest.approx(3 * math.sqrt(3) / 2, rel=1e-14)
        assert g.diameter == pytest.approx(2.0)

    def test_outward_normals(self, voronoi_mesh):
        for c in range(voronoi_mesh.n_cells):
            g = voronoi_mesh.element_geometry(c)
            for e in g.edges:
                assert np.dot(e.normal, 0.5 * (e.start + e.end) - g.centroid) > 0
                assert np.linalg.norm(e.normal) == pytest.approx(1.0)

    def test_index_bounds(self, voronoi_mesh):
        with pytest.raises(IndexError):
            voronoi_mesh.element_geometry(25)


class TestGenerators:
    def test_single_quarter_annulus_cell(self):
        mesh = generate_annulus_quads(2.0, 4.0, True, 1, 1)
        assert mesh.n_cells == 1
        got = {tuple(np.round(v, 12)) for v in mesh.vertices}
        assert got == {(2.0, 0.0), (4.0, 0.0), (0.0, 4.0), (0.0, 2.0)}

    def test_annulus_counts_and_tags(self):
        mesh = generate_annulus_quads(1.0, 2.0, True, 2, 2)
        assert mesh.n_cells == 4 and mesh.n_vertices == 9
        assert set(mesh.boundary_tags) == {"inner", "outer", "theta0", "theta90"}

    def test_invalid_radii(self):
        with pytest.raises(MeshError):
            generate_annulus_quads(4.0, 2.0, True, 1, 1)

    def test_plate_geometry_and_tags(self):
        mesh = generate_plate_with_hole(100.0, 180.0, 50.0)
        lo, hi = mesh.bounding_box()
        np.testing.assert_allclose(lo, [0.0, 0.0])
        np.testing.assert_allclose(hi, [100.0, 180.0])
        assert set(mesh.boundary_tags) == {"hole", "symmetry-x", "symmetry-y", "top", "right"}
        hole = np.array([mesh.vertices[i] for e in mesh.boundary_tags["hole"] for i in e])
        np.testing.assert_allclose(np.hypot(*hole.T), 50.0)

    def test_plate_refinement_quadruples(self):
        n1 = generate_plate_with_hole(100.0, 180.0, 50.0, 1).n_cells
        n2 = generate_plate_with_hole(100.0, 180.0, 50.0, 2).n_cells
        assert 3.6 <= n2 / n1 <= 4.4

    def test_plate_invalid(self):
        with pytest.raises(MeshError):
            generate_plate_with_hole(100.0, 180.0, 120.0)

    def test_half_annulus_tags(self):
        mesh = generate_half_annulus(3.5, 4.5, 2, 12)
        free = mesh.vertices[[i for e in mesh.boundary_tags["free"] for i in e]]
        clamped = mesh.vertices[[i for e in mesh.boundary_tags["clamped"] for i in e]]
        assert np.all(free[:, 0] > 0) and np.allclose(free[:, 1], 0.0)
        assert np.all(clamped[:, 0] < 0) and np.allclose(clamped[:, 1], 0.0, atol=1e-12)


class TestInvariants:
    @pytest.mark.parametrize("mesh", [
        generate_annulus_quads(2.0, 4.0, True, 5, 7),
        generate_plate_with_hole(100.0, 180.0, 50.0, 2),
        generate_half_annulus(3.5, 4.5, 2, 24),
        generate_rectangle_quads(1.0, 1.0, 4, 4),
        load_mesh(DATA / "voronoi25.json"),
    ], ids=["annulus", "plate", "arch", "rect", "voronoi"])
    def test_simply_connected_meshes(self, mesh):
        assert euler_characteristic(mesh) == 1
        assert all(mesh.element_geometry(c).area > 0 for c in range(mesh.n_cells))
        tagged = {tuple(sorted(e)) for edges in mesh.boundary_tags.values() for e in edges}
        boundary = {tuple(sorted(e)) for e in mesh.boundary_edges()}
        assert tagged == boundary
        assert sum(len(e) for e in mesh.boundary_tags.values()) == len(boundary)

    def test_polygonal_area_exact(self):
        n = 8
        mesh = generate_annulus_quads(2.0, 4.0, True, 3, n)
        # quarter annulus with chords: difference of two polygonal sectors
        sector = 0.5 * n * math.sin(math.pi / 2 / n)
        assert mesh.total_area() == pytest.approx(sector * (16.0 - 4.0), rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6),
           st.floats(0.1, 10.0), st.floats(0.1, 10.0))
    def test_rectangle_area_and_euler(self, nx, ny, lx, ly):
        mesh = generate_rectangle_quads(lx, ly, nx, ny)
        assert mesh.total_area() == pytest.approx(lx * ly, rel=1e-10)
        assert euler_characteristic(mesh) == 1
