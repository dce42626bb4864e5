"""Planar Delaunay meshes and P1 finite-element matrices.

Sparse symmetric matrices are plain :class:`scipy.sparse.csr_matrix` objects
with sorted column indices and duplicates summed.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay, QhullError

from . import kernels
from .errors import CollinearInput, DegenerateTriangle, IoFailure, TooFewPoints

log = logging.getLogger(__name__)

DUPLICATE_RTOL = 1e-12
DEGENERATE_RTOL = 1e-14


@dataclass(frozen=True, eq=False)
class TriMesh:
    """A 2-D triangulation.

    Parameters
    ----------
    nodes : ndarray, shape (n, 2)
    triangles : ndarray, shape (m, 3)
        Counterclockwise node-index triples.
    input_index : ndarray, shape (n,), optional
        For meshes built from a point cloud, the index of the input point each
        node came from (duplicates are merged, so this may skip indices).
    """

    nodes: np.ndarray
    triangles: np.ndarray
    input_index: np.ndarray | None = None
    boundary_edges: np.ndarray = field(init=False, repr=False)
    boundary_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=np.float64).reshape(-1, 2)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        p = nodes[tris]
        cw = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
              - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])) < 0
        if cw.any():
            tris = tris.copy()
            tris[cw] = tris[cw][:, [0, 2, 1]]
        nodes.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        if self.input_index is None:
            object.__setattr__(self, "input_index", np.arange(len(nodes)))
        edges, counts, _ = _edge_table(tris)
        bnd = edges[counts == 1]
        object.__setattr__(self, "boundary_edges", bnd)
        object.__setattr__(self, "boundary_nodes", np.unique(bnd))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def scale(self) -> float:
        """Bounding-box diagonal length."""
        return float(np.linalg.norm(np.ptp(self.nodes, axis=0)))

    def edges(self):
        """Unique undirected edges, their triangle counts and the edge index of each triangle side.

        Returns ``(edges (e, 2), counts (e,), tri_edges (m, 3))`` where
        ``tri_edges[t, i]`` is the edge opposite local vertex ``i``.
        """
        return _edge_table(self.triangles)

    def adjacency(self) -> sp.csr_matrix:
        """Node adjacency graph (symmetric, unit weights)."""
        e, _, _ = _edge_table(self.triangles)
        n = self.n_nodes
        a = sp.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                          shape=(n, n))
        return a.tocsr()

    def orphan_nodes(self) -> np.ndarray:
        used = np.zeros(self.n_nodes, dtype=bool)
        used[self.triangles.ravel()] = True
        return np.flatnonzero(~used)


def _edge_table(tris):
    # side i of a triangle is the edge opposite vertex i, oriented CCW
    sides = np.stack([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1).reshape(-1, 2)
    key = np.sort(sides, axis=1)
    uniq, first, inv, counts = np.unique(key, axis=0, return_index=True, return_inverse=True,
                                         return_counts=True)
    # keep the orientation of the first triangle side, so boundary edges run CCW
    return sides[first], counts, inv.reshape(-1, 3)


def delaunay_triangulate(points, alpha: float | None = None, quiet: bool = False) -> TriMesh:
    """Delaunay triangulation of a 2-D point cloud.

    Parameters
    ----------
    points : array_like, shape (n, 2)
    alpha : float, optional
        Drop triangles whose circumradius exceeds ``alpha``; gives concave
        domains for scattered data. Default keeps the convex hull.
    quiet : bool
        Log instead of warning about merged duplicates and nodes left out of
        the triangulation.
    """
    notify = log.info if quiet else (lambda msg: warnings.warn(msg, stacklevel=3))
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 3:
        raise TooFewPoints(f"need at least 3 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    if alpha is not None and not alpha > 0:
        raise ValueError("alpha must be positive")

    scale = float(np.linalg.norm(np.ptp(pts, axis=0)))
    keep = _dedupe(pts, DUPLICATE_RTOL * max(scale, 1e-300))
    if len(keep) < len(pts):
        notify(f"merged {len(pts) - len(keep)} duplicate point(s)")
    upts = pts[keep]
    if len(upts) < 3:
        raise TooFewPoints("fewer than 3 distinct points")
    centred = upts - upts.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise CollinearInput("all points lie on a line")
    try:
        tri = Delaunay(upts)
    except QhullError as exc:
        raise CollinearInput(str(exc)) from exc

    simp = tri.simplices.astype(np.int64)
    p = upts[simp]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    flip = area < 0
    simp[flip] = simp[flip][:, [0, 2, 1]]
    simp = _remove_slivers(upts, simp, DEGENERATE_RTOL * scale * scale)
    if alpha is not None:
        simp = simp[circumradii(upts, simp) <= alpha]
    if len(simp) == 0:
        raise CollinearInput("no triangles left after pruning")
    mesh = TriMesh(upts, simp, input_index=keep)
    orphans = mesh.orphan_nodes()
    if len(orphans):
        notify(f"{len(orphans)} node(s) belong to no triangle")
    return mesh


def _signed_areas(nodes, tris):
    p = nodes[tris]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def _remove_slivers(nodes, tris, tol, max_rounds=100):
    """Get rid of near-zero-area triangles from nearly collinear hull points.

    A sliver whose longest side is interior is flipped with its neighbour across
    that side; one whose longest side is on the hull is dropped, which leaves its
    middle vertex on the new hull.
    """
    tris = tris.copy()
    for _ in range(max_rounds):
        area = np.abs(_signed_areas(nodes, tris))
        bad = np.flatnonzero(area <= tol)
        if len(bad) == 0:
            return tris
        log.debug("fixing %d sliver triangle(s)", len(bad))
        edges, counts, tri_edges = _edge_table(tris)
        owners = {}
        for t, row in enumerate(tri_edges):
            for i, e in enumerate(row):
                owners.setdefault(e, []).append((t, i))
        drop = np.zeros(len(tris), dtype=bool)
        touched = np.zeros(len(tris), dtype=bool)
        for t in bad:
            if touched[t]:
                continue
            p = nodes[tris[t]]
            # side i is opposite vertex i
            side_len = np.linalg.norm(p[[1, 2, 0]] - p[[2, 0, 1]], axis=1)
            i = int(np.argmax(side_len))
            e = tri_edges[t, i]
            if counts[e] == 1:
                drop[t] = touched[t] = True
                continue
            (u, j), = [(u, j) for u, j in owners[e] if u != t]
            if touched[u]:
                continue
            a, b, c = tris[t, i], tris[t, (i + 1) % 3], tris[t, (i + 2) % 3]
            d = tris[u, j]
            # quad a-b-d-c (CCW) loses diagonal b-c and gains a-d
            tris[t] = (a, b, d)
            tris[u] = (a, d, c)
            touched[t] = touched[u] = True
        tris = tris[~drop]
        flip = _signed_areas(nodes, tris) < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris[np.abs(_signed_areas(nodes, tris)) > tol]


def circumradii(nodes, tris) -> np.ndarray:
    p = nodes[tris]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    area = 0.5 * np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    with np.errstate(divide="ignore"):
        return a * b * c / (4.0 * area)


def _dedupe(pts, tol):
    """Indices of the first occurrence of each point up to ``tol``."""
    if tol <= 0:
        return np.arange(len(pts))
    from scipy.spatial import cKDTree

    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(len(pts))
    drop = np.zeros(len(pts), dtype=bool)
    for i, j in sorted(map(tuple, np.sort(pairs, axis=1))):
        if not drop[i]:
            drop[j] = True
    return np.flatnonzero(~drop)


def _local_matrices(mesh: TriMesh):
    area, k, m = kernels.p1_local(mesh.nodes, mesh.triangles)
    tol = DEGENERATE_RTOL * mesh.scale ** 2
    bad = np.flatnonzero(area <= tol)
    if len(bad):
        raise DegenerateTriangle(f"{len(bad)} triangle(s) with area <= {tol:.3g} (first: {bad[0]})")
    return area, k, m


def _scatter(mesh: TriMesh, local) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    a = sp.coo_matrix((local.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    a.sum_duplicates()
    a.sort_indices()
    return a


def assemble_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """``D_ij = -∫ ∇φ_i · ∇φ_j`` for P1 hat functions (negative semidefinite)."""
    _, k, _ = _local_matrices(mesh)
    return _scatter(mesh, -k)


def assemble_mass(mesh: TriMesh) -> sp.csr_matrix:
    """``M_ij = ∫ φ_i φ_j`` with the exact element rule ``area/12 * [[2,1,1],[1,2,1],[1,1,2]]``."""
    _, _, m = _local_matrices(mesh)
    return _scatter(mesh, m)


def write_node_ele(mesh: TriMesh, stem) -> tuple[Path, Path]:
    """Write ``<stem>.node`` (``index x y``) and ``<stem>.ele`` (``index n1 n2 n3``)."""
    stem = Path(stem)
    node_path, ele_path = stem.with_suffix(".node"), stem.with_suffix(".ele")
    try:
        with open(node_path, "w") as fh:
            for i, (x, y) in enumerate(mesh.nodes):
                fh.write(f"{i} {float(x)!r} {float(y)!r}\n")
        with open(ele_path, "w") as fh:
            for i, (a, b, c) in enumerate(mesh.triangles):
                fh.write(f"{i} {a} {b} {c}\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return node_path, ele_path


def write_vtk(mesh: TriMesh, path, fields=None) -> Path:
    """Legacy ASCII VTK unstructured grid, with optional nodal scalar fields."""
    path = Path(path)
    n, m = mesh.n_nodes, len(mesh.triangles)
    lines = ["# vtk DataFile Version 3.0", "dynlap mesh", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{float(x)!r} {float(y)!r} 0.0" for x, y in mesh.nodes]
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    if fields:
        lines.append(f"POINT_DATA {n}")
        for name, values in fields.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (n,):
                raise ValueError(f"field {name!r} has shape {values.shape}, expected ({n},)")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [repr(float(v)) for v in values]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def grid_points(n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """``n x n`` uniform grid on ``[lo, hi]^2`` including the boundary, row-major in y."""
    g = np.linspace(lo, hi, n)
    x, y = np.meshgrid(g, g)
    return np.column_stack([x.ravel(), y.ravel()])
