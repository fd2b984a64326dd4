import numpy as np
import pytest

import stabelast as se
from stabelast.errors import MacroPartitionError, MeshTopologyError
from stabelast.mesh import KIND_BLUE, KIND_GREEN, KIND_RED, KIND_ROOT, MarkedSet


def brute_force_edges(mesh):
    """Independent edge enumeration: set of sorted vertex pairs."""
    edges = set()
    for tri in mesh.triangles:
        for a, b in ((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])):
            edges.add((min(a, b), max(a, b)))
    return edges


def assert_conforming(mesh):
    topo = se.build_edge_topology(mesh)
    interior = ~topo.is_boundary
    assert np.all(topo.edge_triangles[interior, 1] >= 0)
    assert np.all(topo.edge_triangles[topo.is_boundary, 1] == -1)


class TestGenerate:
    def test_unit_square_counts_follow_red_refinement(self):
        # level l: 2 * 4^(l+1) triangles on the (2^(l+1)+1)^2 grid
        for level in (1, 2, 3):
            mesh = se.generate_initial_mesh("unit_square", level)
            n = 2 ** (level + 1)
            assert mesh.n_triangles == 2 * 4 ** (level + 1)
            assert mesh.n_vertices == (n + 1) ** 2
        # level 3 is the paper-scale start: 2*289 + 512 = 1090 dofs
        mesh = se.generate_initial_mesh("unit_square", 3)
        assert 2 * mesh.n_vertices + mesh.n_triangles == 1090

    def test_unit_square_geometry(self):
        mesh = se.generate_initial_mesh("unit_square", 1)
        areas = se.triangle_areas(mesh)
        assert np.all(areas > 0)
        assert areas.sum() == pytest.approx(1.0, rel=1e-14)
        assert se.min_angle(mesh) == pytest.approx(45.0, abs=1e-9)
        assert_conforming(mesh)
        # boundary flags mark exactly the vertices on the unit square boundary
        on = (
            (np.abs(mesh.vertices[:, 0]) < 1e-12)
            | (np.abs(mesh.vertices[:, 0] - 1) < 1e-12)
            | (np.abs(mesh.vertices[:, 1]) < 1e-12)
            | (np.abs(mesh.vertices[:, 1] - 1) < 1e-12)
        )
        assert np.array_equal(mesh.vertex_on_boundary, on)

    def test_l_shape_excludes_removed_quadrant(self):
        mesh = se.generate_initial_mesh("l_shape", 1)
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        assert not np.any((x < -1e-12) & (y < -1e-12))
        origin = np.flatnonzero((np.abs(x) < 1e-12) & (np.abs(y) < 1e-12))
        assert len(origin) == 1
        assert mesh.vertex_on_boundary[origin[0]]  # re-entrant corner
        assert se.triangle_areas(mesh).sum() == pytest.approx(3.0, rel=1e-14)
        assert_conforming(mesh)

    def test_every_triangle_has_red_parent(self):
        mesh = se.generate_initial_mesh("unit_square", 1)
        assert np.all(mesh.kind == KIND_RED)
        assert np.all(mesh.parent >= 0)

    def test_rejects_level_zero(self):
        with pytest.raises(ValueError):
            se.generate_initial_mesh("unit_square", 0)
        with pytest.raises(ValueError):
            se.generate_initial_mesh("triangle", 1)


class TestEdgeTopology:
    def test_single_triangle(self):
        mesh = se.Mesh(
            vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            triangles=np.array([[0, 1, 2]]),
            vertex_on_boundary=np.ones(3, bool),
            parent=np.array([-1]),
            kind=np.array([0], dtype=np.int8),
        )
        topo = se.build_edge_topology(mesh)
        assert topo.n_edges == 3
        assert topo.is_boundary.all()

    def test_two_triangles(self, two_triangle_mesh):
        topo = se.build_edge_topology(two_triangle_mesh)
        assert topo.n_edges == 5
        assert topo.is_boundary.sum() == 4

    def test_against_brute_force_enumeration(self, square_mesh):
        topo = se.build_edge_topology(square_mesh)
        expected = brute_force_edges(square_mesh)
        got = {tuple(e) for e in topo.edges}
        assert got == expected
        # Euler consistency: ne = (3 nt + n_boundary) / 2
        assert topo.n_edges == (3 * square_mesh.n_triangles + topo.is_boundary.sum()) / 2

    def test_edge_lengths_and_normals(self, square_mesh):
        topo = se.build_edge_topology(square_mesh)
        lens = np.linalg.norm(
            square_mesh.vertices[topo.edges[:, 0]] - square_mesh.vertices[topo.edges[:, 1]], axis=1
        )
        assert np.allclose(topo.edge_length, lens)
        assert np.allclose(np.linalg.norm(topo.edge_normal, axis=1), 1.0)
        # boundary normals point out of the domain: midpoint + eps*n leaves [0,1]^2
        bd = np.flatnonzero(topo.is_boundary)
        mids = 0.5 * (square_mesh.vertices[topo.edges[bd, 0]] + square_mesh.vertices[topo.edges[bd, 1]])
        outside = mids + 1e-6 * topo.edge_normal[bd]
        assert np.all((outside < -1e-9).any(axis=1) | (outside > 1 + 1e-9).any(axis=1))

    def test_nonconforming_mesh_rejected(self):
        # three triangles sharing one edge
        mesh = se.Mesh(
            vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 1.0]]),
            triangles=np.array([[0, 1, 2], [1, 3, 2], [0, 2, 4]]),
            vertex_on_boundary=np.ones(5, bool),
            parent=np.full(3, -1),
            kind=np.zeros(3, dtype=np.int8),
        )
        bad = se.Mesh(
            vertices=mesh.vertices,
            triangles=np.array([[0, 1, 2], [1, 3, 2], [2, 0, 1]]),  # edge (0,1) thrice... (0,2) too
            vertex_on_boundary=mesh.vertex_on_boundary,
            parent=mesh.parent,
            kind=mesh.kind,
        )
        with pytest.raises(MeshTopologyError):
            se.build_edge_topology(bad)


class TestMacroelements:
    def test_uniform_red_mesh_partitions_into_quads(self, square_mesh):
        macros = se.derive_macroelements(square_mesh)
        counts = np.bincount(macros.macro_of)
        assert counts.sum() == square_mesh.n_triangles  # disjoint cover
        assert np.all(counts == 4)
        assert all(len(g) == 3 for g in macros.interior_edges)

    def test_green_and_blue_groups(self, two_triangle_mesh):
        # marking triangle 0 red-refines it and green-bisects its neighbour
        refined = se.refine_rgb(two_triangle_mesh, MarkedSet(np.array([0])))
        assert refined.n_triangles == 6
        assert (refined.kind == KIND_RED).sum() == 4
        assert (refined.kind == KIND_GREEN).sum() == 2
        macros = se.derive_macroelements(refined)
        sizes = sorted(np.bincount(macros.macro_of).tolist())
        assert sizes == [2, 4]
        gamma_sizes = sorted(len(g) for g in macros.interior_edges)
        assert gamma_sizes == [1, 3]

    def test_blue_group(self):
        # strip of three root triangles; marking the outer two forces blue
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, -1.0]])
        tris = np.array([[0, 1, 2], [1, 3, 2], [0, 4, 1]])
        mesh = se.Mesh(verts, tris, np.ones(5, bool), np.full(3, -1), np.zeros(3, np.int8))
        refined = se.refine_rgb(mesh, MarkedSet(np.array([1, 2])))
        assert_conforming(refined)
        assert (refined.kind == KIND_BLUE).sum() == 3
        macros = se.derive_macroelements(refined)
        blue_macro = macros.macro_of[np.flatnonzero(refined.kind == KIND_BLUE)[0]]
        members = np.flatnonzero(macros.macro_of == blue_macro)
        assert len(members) == 3
        assert len(macros.interior_edges[blue_macro]) == 2

    def test_root_triangle_rejected(self, two_triangle_mesh):
        with pytest.raises(MacroPartitionError):
            se.derive_macroelements(two_triangle_mesh)

    def test_partial_refinement_keeps_cover_and_merges_orphans(self, square_mesh):
        rng = np.random.default_rng(5)
        mesh = square_mesh
        for _ in range(3):
            marked = np.flatnonzero(rng.uniform(size=mesh.n_triangles) < 0.3)
            if len(marked) == 0:
                continue
            mesh = se.refine_rgb(mesh, MarkedSet(marked))
            topo = se.build_edge_topology(mesh)
            macros = se.derive_macroelements(mesh, topo)
            counts = np.bincount(macros.macro_of, minlength=macros.n_macros)
            assert counts.sum() == mesh.n_triangles
            assert counts.min() >= 2  # orphan singletons were merged
            # every Gamma_M edge is interior with both neighbours inside M
            for m, edges in enumerate(macros.interior_edges):
                for e in edges:
                    assert not topo.is_boundary[e]
                    t1, t2 = topo.edge_triangles[e]
                    assert macros.macro_of[t1] == m and macros.macro_of[t2] == m


class TestDorfler:
    def test_spec_examples(self):
        assert se.mark_dorfler([4.0, 3.0, 2.0, 1.0], 0.5).marked.tolist() == [0, 1]
        assert se.mark_dorfler([1.0, 1.0, 1.0, 1.0], 0.5).marked.tolist() == [0, 1]
        # theta -> 1 marks everything with a positive indicator
        marked = se.mark_dorfler([4.0, 3.0, 0.0, 1.0], 0.999999)
        assert marked.marked.tolist() == [0, 1, 3]

    def test_all_zero_warns_and_returns_empty(self):
        with pytest.warns(UserWarning, match="zero"):
            marked = se.mark_dorfler([0.0, 0.0], 0.5)
        assert len(marked) == 0

    def test_minimality_on_random_vectors(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            eta2 = rng.uniform(0, 1, rng.integers(2, 40)) ** 2
            theta = rng.uniform(0.1, 0.9)
            marked = se.mark_dorfler(eta2, theta).marked
            total = eta2.sum()
            assert eta2[marked].sum() >= theta * total * (1 - 1e-12)
            smallest = marked[np.argmin(eta2[marked])]
            rest = np.setdiff1d(marked, [smallest])
            assert eta2[rest].sum() < theta * total

    def test_invalid_theta(self):
        with pytest.raises(ValueError):
            se.mark_dorfler([1.0], 1.5)


class TestRefine:
    def test_single_triangle_red(self):
        mesh = se.Mesh(
            vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            triangles=np.array([[0, 1, 2]]),
            vertex_on_boundary=np.ones(3, bool),
            parent=np.array([-1]),
            kind=np.array([0], dtype=np.int8),
        )
        refined = se.refine_rgb(mesh, MarkedSet(np.array([0])))
        areas = se.triangle_areas(refined)
        assert refined.n_triangles == 4
        assert np.allclose(areas, 0.5 / 4)
        assert np.all(refined.parent == 0)

    def test_mark_all_quadruples(self, square_mesh):
        refined = se.refine_rgb(square_mesh, MarkedSet(np.arange(square_mesh.n_triangles)))
        assert refined.n_triangles == 4 * square_mesh.n_triangles
        assert_conforming(refined)

    def test_no_op_on_empty_marking(self, square_mesh):
        assert se.refine_rgb(square_mesh, MarkedSet(np.empty(0, int))) is square_mesh

    def test_area_conservation_and_conformity_random(self, square_mesh):
        rng = np.random.default_rng(3)
        mesh = square_mesh
        for _ in range(5):
            marked = np.flatnonzero(rng.uniform(size=mesh.n_triangles) < 0.25)
            mesh = se.refine_rgb(mesh, MarkedSet(marked))
            assert_conforming(mesh)
            assert se.triangle_areas(mesh).sum() == pytest.approx(1.0, rel=1e-12)
            assert np.all(se.triangle_areas(mesh) > 0)

    def test_min_angle_preserved_on_structured_meshes(self, square_mesh):
        # right-isosceles grids are closed under red-green-blue refinement
        rng = np.random.default_rng(9)
        mesh = square_mesh
        initial = se.min_angle(mesh)
        for _ in range(8):
            marked = np.flatnonzero(rng.uniform(size=mesh.n_triangles) < 0.2)
            if len(marked) == 0:
                marked = np.array([0])
            mesh = se.refine_rgb(mesh, MarkedSet(marked))
        assert se.min_angle(mesh) >= initial / 2 - 1e-9
        assert se.min_angle(mesh) == pytest.approx(45.0, abs=1e-9)

    def test_kept_triangles_get_fresh_group_labels(self, square_mesh):
        refined = se.refine_rgb(square_mesh, MarkedSet(np.array([0])))
        kept = refined.kind == KIND_RED
        new = refined.parent[refined.parent < square_mesh.n_triangles]
        # children of triangle 0 carry label 0; survivors sit past the old range
        assert np.all(np.sort(np.unique(new)) >= 0)
        survivors = refined.parent >= square_mesh.n_triangles
        assert survivors.sum() > 0

    def test_determinism(self, square_mesh):
        m1 = se.refine_rgb(square_mesh, MarkedSet(np.array([0, 5, 7])))
        m2 = se.refine_rgb(square_mesh, MarkedSet(np.array([0, 5, 7])))
        assert np.array_equal(m1.vertices, m2.vertices)
        assert np.array_equal(m1.triangles, m2.triangles)
        assert np.array_equal(m1.parent, m2.parent)


class TestMeshIO:
    def test_roundtrip(self, square_mesh, tmp_path):
        path = tmp_path / "mesh.txt"
        se.write_mesh(square_mesh, path)
        back = se.read_mesh(path)
        assert np.array_equal(back.triangles, square_mesh.triangles)
        assert np.allclose(back.vertices, square_mesh.vertices)
        assert np.array_equal(back.vertex_on_boundary, square_mesh.vertex_on_boundary)
        assert np.array_equal(back.parent, square_mesh.parent)
        assert np.array_equal(back.kind, square_mesh.kind)

    def test_comments_allowed(self, tmp_path):
        path = tmp_path / "mesh.txt"
        path.write_text(
            "# a comment\n3 1\n0 0 1\n1 0 1  # inline\n0 1 1\n0 1 2 -1 root\n"
        )
        mesh = se.read_mesh(path)
        assert mesh.n_triangles == 1
        assert mesh.kind[0] == KIND_ROOT
