"""Discrete dynamic Laplacian: time-averaged slice stiffness against the initial mass matrix."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import (CollinearInput, CollinearSlice, InitialSliceIncomplete, IoFailure,
                     SliceTooSparse, TooFewPoints, ValidationError)
from .flow import TrajectoryEnsemble
from .kernels import n_threads
from .mesh import TriMesh, assemble_mass, assemble_stiffness, delaunay_triangulate

log = logging.getLogger(__name__)


class BC(str, Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"

    @classmethod
    def parse(cls, value) -> "BC":
        try:
            return cls(str(getattr(value, "value", value)).lower())
        except ValueError:
            raise ValidationError(f"unknown boundary condition {value!r}") from None


@dataclass(frozen=True, eq=False)
class DynLapSystem:
    """The pencil ``(A, M)`` restricted to the active nodes.

    ``A`` is the slice-averaged stiffness, ``M`` the mass matrix of ``mesh0``.
    For Dirichlet problems the boundary nodes of ``mesh0`` are removed and
    ``active_nodes`` lists the surviving node indices.
    """

    A: sp.csr_matrix
    M: sp.csr_matrix
    mesh0: TriMesh
    bc: BC
    active_nodes: np.ndarray
    slice_meshes: list | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.mesh0.n_nodes

    def expand(self, v) -> np.ndarray:
        """Scatter values on active nodes into full nodal fields (zeros elsewhere)."""
        v = np.asarray(v)
        out = np.zeros((self.n_nodes,) + v.shape[1:], dtype=v.dtype)
        out[self.active_nodes] = v
        return out


def _slice_mesh(ensemble: TrajectoryEnsemble, l: int, alpha=None):
    idx, pts = ensemble.slice_points(l)
    if len(idx) < 3:
        raise SliceTooSparse(f"slice {l} has {len(idx)} present point(s); need 3")
    try:
        mesh = delaunay_triangulate(pts, alpha, quiet=True)
        if len(mesh.orphan_nodes()):
            log.info("slice %d: %d point(s) not in any triangle; treated as missing there",
                     l, len(mesh.orphan_nodes()))
    except TooFewPoints as exc:
        raise SliceTooSparse(f"slice {l}: {exc}") from exc
    except CollinearInput as exc:
        raise CollinearSlice(f"slice {l}: {exc}") from exc
    return idx[mesh.input_index], mesh


def assemble_slice(ensemble: TrajectoryEnsemble, l: int, alpha: float | None = None,
                   return_mesh: bool = False):
    """Stiffness of the Delaunay mesh of slice ``l``, embedded as an ``N x N`` matrix.

    Rows and columns of trajectories absent at slice ``l`` are zero.
    """
    if not -ensemble.n_times <= l < ensemble.n_times:
        raise IndexError(f"slice {l} out of range")
    traj, mesh = _slice_mesh(ensemble, l, alpha)
    D = assemble_stiffness(mesh).tocoo()
    N = ensemble.n_trajectories
    out = sp.csr_matrix((D.data, (traj[D.row], traj[D.col])), shape=(N, N))
    out.sort_indices()
    return (out, mesh) if return_mesh else out


def assemble_system(ensemble: TrajectoryEnsemble, bc="neumann", alpha: float | None = None,
                    keep_slices: bool = False) -> DynLapSystem:
    """Average the slice stiffness matrices and pair them with the initial mass matrix.

    Slices are summed in time order and divided by ``T`` regardless of missing
    observations.
    """
    bc = BC.parse(bc)
    missing = np.flatnonzero(~ensemble.present[:, 0])
    if len(missing):
        raise InitialSliceIncomplete(f"{len(missing)} trajectory(ies) absent at the first time")
    T = ensemble.n_times
    if T < 1:
        raise ValidationError("no time slices")

    def work(l):
        return assemble_slice(ensemble, l, alpha, return_mesh=True)

    threads = min(n_threads(), T)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, range(T)))
    else:
        parts = [work(l) for l in range(T)]

    N = ensemble.n_trajectories
    total = sp.csr_matrix((N, N))
    for D, _ in parts:
        total = total + D
    A = (total / T).tocsr()
    A.sort_indices()

    mesh0 = parts[0][1]
    if len(mesh0.input_index) != N:
        raise ValidationError("initial positions contain duplicate points")
    orphans = mesh0.orphan_nodes()
    if len(orphans):
        raise ValidationError(f"{len(orphans)} initial node(s) belong to no triangle; "
                              "increase alpha")
    M = assemble_mass(mesh0)
    if bc is BC.DIRICHLET:
        active = np.setdiff1d(np.arange(N), mesh0.boundary_nodes)
        A = A[active][:, active].tocsr()
        M = M[active][:, active].tocsr()
    else:
        active = np.arange(N)
    slices = [m for _, m in parts] if keep_slices else None
    return DynLapSystem(A, M, mesh0, bc, active, slices)


def write_matrix_market(matrix, path, comment: str = "") -> Path:
    path = Path(path)
    try:
        scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment, symmetry="general")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path if path.suffix == ".mtx" else path.with_name(path.name + ".mtx")


def read_matrix_market(path) -> sp.csr_matrix:
    try:
        return sp.csr_matrix(scipy.io.mmread(str(path)))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
