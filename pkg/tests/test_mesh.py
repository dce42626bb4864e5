import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from dynlap.errors import CollinearInput, DegenerateTriangle, TooFewPoints
from dynlap.flow import polygon_area
from dynlap.mesh import (TriMesh, assemble_mass, assemble_stiffness, circumradii,
                         delaunay_triangulate, grid_points, write_node_ele, write_vtk)

UNIT_TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def random_cloud(seed, n=200):
    return np.random.default_rng(seed).random((n, 2))


def test_single_triangle():
    m = delaunay_triangulate(UNIT_TRI)
    assert m.triangles.shape == (1, 3)
    assert len(m.boundary_edges) == 3
    assert m.total_area == pytest.approx(0.5)


def test_square_corners():
    m = delaunay_triangulate(SQUARE)
    assert len(m.triangles) == 2
    assert m.total_area == pytest.approx(1.0, abs=1e-15)
    assert len(m.boundary_edges) == 4


def test_hull_area_matches_shoelace():
    pts = np.random.default_rng(0).random((500, 2))
    m = delaunay_triangulate(pts)
    hull = ConvexHull(pts)
    ring = pts[hull.vertices]  # counterclockwise in 2-D
    assert abs(m.total_area - polygon_area(ring)) <= 1e-10


def test_triangles_positive_and_edges_consistent():
    m = delaunay_triangulate(random_cloud(1))
    assert np.all(m.areas > 0)
    _, counts, _ = m.edges()
    assert set(np.unique(counts)) <= {1, 2}
    assert len(m.boundary_edges) == int((counts == 1).sum())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 150))
def test_delaunay_empty_circumcircle(seed, n):
    pts = np.random.default_rng(seed).random((n, 2))
    m = delaunay_triangulate(pts)
    p = m.nodes[m.triangles]
    ax, ay = p[:, 0, 0], p[:, 0, 1]
    bx, by = p[:, 1, 0], p[:, 1, 1]
    cx, cy = p[:, 2, 0], p[:, 2, 1]
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    R = np.hypot(ax - ux, ay - uy)
    dist = np.hypot(m.nodes[:, None, 0] - ux, m.nodes[:, None, 1] - uy)
    assert np.all(dist >= R * (1 - 1e-10))
    assert np.allclose(R, circumradii(m.nodes, m.triangles))


def test_duplicates_merged_with_warning():
    pts = np.vstack([SQUARE, SQUARE[:1] + 1e-14])
    with pytest.warns(UserWarning, match="duplicate"):
        m = delaunay_triangulate(pts)
    assert m.n_nodes == 4
    assert list(m.input_index) == [0, 1, 2, 3]


def test_input_errors():
    with pytest.raises(TooFewPoints):
        delaunay_triangulate(UNIT_TRI[:2])
    with pytest.raises(CollinearInput):
        delaunay_triangulate([[0, 0], [1, 1], [2, 2], [3, 3]])


def test_alpha_pruning_makes_concave_domain():
    # L-shaped cloud: the notch is only bridged by large triangles
    pts = grid_points(21)
    pts = pts[~((pts[:, 0] > 0.5 + 1e-9) & (pts[:, 1] > 0.5 + 1e-9))]
    convex = delaunay_triangulate(pts)
    pruned = delaunay_triangulate(pts, alpha=0.05)
    assert convex.total_area == pytest.approx(0.875, rel=1e-9)
    # the half cell at the re-entrant corner has the same circumradius as every grid cell
    assert pruned.total_area == pytest.approx(0.75 + 0.05**2 / 2, rel=1e-9)
    _, counts, _ = pruned.edges()
    assert len(pruned.boundary_edges) == int((counts == 1).sum())


def test_clockwise_input_is_reoriented():
    m = TriMesh(UNIT_TRI, [[0, 2, 1]])
    assert m.areas[0] > 0


def test_stiffness_unit_triangle():
    D = assemble_stiffness(delaunay_triangulate(UNIT_TRI))
    expected = -np.array([[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]])
    assert np.allclose(D.toarray(), expected, atol=1e-15)


def test_mass_unit_triangle():
    M = assemble_mass(delaunay_triangulate(UNIT_TRI))
    expected = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24
    assert np.allclose(M.toarray(), expected, atol=1e-16)


def test_two_triangle_square():
    m = delaunay_triangulate(SQUARE)
    D = assemble_stiffness(m).toarray()
    assert np.max(np.linalg.eigvalsh(D)) <= 1e-14
    v = np.random.default_rng(3).standard_normal((100, 4))
    assert np.all(np.einsum("ij,jk,ik->i", v, D, v) <= 1e-14)
    assert assemble_mass(m).sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_matrix_invariants_random_meshes(seed):
    m = delaunay_triangulate(random_cloud(seed, 150))
    D = assemble_stiffness(m)
    M = assemble_mass(m)
    dmax = abs(D).max()
    assert np.max(np.abs(D.sum(axis=1))) <= 1e-12 * dmax
    assert abs(D - D.T).max() <= 1e-12 * dmax
    assert abs(M.sum() - m.total_area) <= 1e-12 * m.total_area
    assert np.linalg.eigvalsh(M.toarray()).min() > 0
    v = np.random.default_rng(seed).standard_normal((1000, m.n_nodes))
    q = np.einsum("ij,ij->i", v, (D @ v.T).T)
    assert np.all(q <= 1e-12 * np.einsum("ij,ij->i", v, v))
    assert D.has_sorted_indices and M.has_sorted_indices


def test_degenerate_triangle_rejected():
    m = TriMesh([[0, 0], [1, 0], [2, 1e-20]], [[0, 1, 2]])
    with pytest.raises(DegenerateTriangle):
        assemble_stiffness(m)
    with pytest.raises(DegenerateTriangle):
        assemble_mass(m)


def test_mesh_is_read_only():
    m = delaunay_triangulate(SQUARE)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 5.0


def test_node_ele_and_vtk(tmp_path):
    m = delaunay_triangulate(SQUARE)
    node, ele = write_node_ele(m, tmp_path / "sq")
    rows = [line.split() for line in node.read_text().splitlines()]
    assert len(rows) == 4 and all(len(r) == 3 for r in rows)
    assert np.allclose([[float(r[1]), float(r[2])] for r in rows], m.nodes)
    tris = [list(map(int, line.split()[1:])) for line in ele.read_text().splitlines()]
    assert np.array_equal(tris, m.triangles)
    vtk = write_vtk(m, tmp_path / "sq.vtk", {"f": np.arange(4.0)}).read_text()
    assert "DATASET UNSTRUCTURED_GRID" in vtk and "CELL_TYPES 2" in vtk and "SCALARS f double 1" in vtk


def test_hull_slivers_do_not_orphan_nodes():
    # nearly collinear points along the bottom edge of the hull
    x = np.linspace(0, 1, 30)
    bottom = np.column_stack([x, 1e-13 * np.sin(40 * x)])
    pts = np.vstack([bottom, np.random.default_rng(7).random((40, 2)) * [1, 0.5] + [0, 0.2]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = delaunay_triangulate(pts)
    assert np.all(np.abs(m.areas) > 1e-14 * m.scale**2)
    assert len(m.orphan_nodes()) == 0
