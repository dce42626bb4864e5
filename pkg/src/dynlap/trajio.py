"""Trajectory CSV ingestion and field export."""
from __future__ import annotations

import csv
import logging
import math
import warnings
from pathlib import Path

import numpy as np

from .errors import IoFailure, MalformedRow, NoCommonTimeGrid
from .flow import TrajectoryEnsemble
from .mesh import TriMesh, write_vtk

log = logging.getLogger(__name__)

TRAJ_HEADER = ["id", "t", "x", "y"]


def _parse_id(s: str):
    try:
        return int(s)
    except ValueError:
        return s


def load_trajectories(path) -> TrajectoryEnsemble:
    """Read an ``id,t,x,y`` CSV. Rows may come in any order; a missing row is a missing observation.

    Trajectories absent at the earliest time are dropped with a warning.
    """
    path = Path(path)
    obs = {}
    order = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != TRAJ_HEADER:
                raise MalformedRow(1, f"expected header {','.join(TRAJ_HEADER)}, got {header}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 4:
                    raise MalformedRow(lineno, f"expected 4 fields, got {len(row)}")
                tid = _parse_id(row[0].strip())
                try:
                    t, x, y = (float(c) for c in row[1:])
                except ValueError:
                    raise MalformedRow(lineno, "non-numeric t, x or y") from None
                if not all(math.isfinite(v) for v in (t, x, y)):
                    raise MalformedRow(lineno, "non-finite value")
                if tid not in obs:
                    obs[tid] = {}
                    order.append(tid)
                if t in obs[tid]:
                    raise MalformedRow(lineno, f"duplicate observation for id={tid}, t={t!r}")
                obs[tid][t] = (x, y)
    except IoFailure:
        raise
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if not obs:
        raise NoCommonTimeGrid(f"{path} has no observations")

    times = np.array(sorted({t for d in obs.values() for t in d}))
    t_index = {t: j for j, t in enumerate(times.tolist())}
    counts = np.zeros(len(times), dtype=int)
    for d in obs.values():
        for t in d:
            counts[t_index[t]] += 1
    sparse_times = times[counts < 3]
    if len(sparse_times):
        raise NoCommonTimeGrid(f"{len(sparse_times)} time(s) observed by fewer than 3 trajectories "
                               f"(first t={sparse_times[0]!r})")

    keep = [tid for tid in order if times[0] in obs[tid]]
    dropped = len(order) - len(keep)
    if dropped:
        warnings.warn(f"dropped {dropped} trajectory(ies) absent at the earliest time t={times[0]!r}",
                      stacklevel=2)
    pos = np.full((len(keep), len(times), 2), np.nan)
    present = np.zeros((len(keep), len(times)), dtype=bool)
    for i, tid in enumerate(keep):
        for t, xy in obs[tid].items():
            j = t_index[t]
            pos[i, j] = xy
            present[i, j] = True
    ids = np.array(keep, dtype=object if any(isinstance(k, str) for k in keep) else np.int64)
    return TrajectoryEnsemble(times, pos, present, ids)


def save_trajectories(ensemble: TrajectoryEnsemble, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(TRAJ_HEADER) + "\n")
            for i, tid in enumerate(ensemble.ids):
                for j, t in enumerate(ensemble.times):
                    if ensemble.present[i, j]:
                        x, y = ensemble.positions[i, j]
                        fh.write(f"{tid},{float(t)!r},{float(x)!r},{float(y)!r}\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def write_nodes_csv(nodes, fields: dict, path) -> Path:
    """``id,x,y,<field names...>`` with shortest round-trip float formatting."""
    nodes = np.asarray(nodes, dtype=float)
    names = list(fields)
    cols = []
    for name in names:
        v = np.asarray(fields[name], dtype=float)
        if v.shape != (len(nodes),):
            raise ValueError(f"field {name!r} has shape {v.shape}, expected ({len(nodes)},)")
        cols.append(v)
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(["id", "x", "y"] + names) + "\n")
            for i in range(len(nodes)):
                vals = [repr(float(nodes[i, 0])), repr(float(nodes[i, 1]))]
                vals += [repr(float(c[i])) for c in cols]
                fh.write(f"{i}," + ",".join(vals) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def read_nodes_csv(path):
    """Inverse of :func:`write_nodes_csv`: ``(nodes, {name: values})``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    header, body = rows[0], rows[1:]
    data = np.array([[float(c) for c in r[1:]] for r in body]).reshape(len(body), len(header) - 1)
    return data[:, :2], {name: data[:, 2 + j] for j, name in enumerate(header[3:])}


def write_eigenvalues_csv(eigenvalues, residuals, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write("k,lambda,residual\n")
            for j, (lam, res) in enumerate(zip(eigenvalues, residuals), start=1):
                fh.write(f"{j},{float(lam)!r},{float(res)!r}\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def read_eigenvalues_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return (np.array([float(r["lambda"]) for r in rows]),
            np.array([float(r["residual"]) for r in rows]))


def export_fields(mesh: TriMesh, fields: dict, path, eigen=None, vtk: bool = False) -> list[Path]:
    """Write ``nodes.csv`` (and ``eigenvalues.csv`` / ``fields.vtk`` when asked) into directory ``path``."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    written = [write_nodes_csv(mesh.nodes, fields, out / "nodes.csv")]
    if eigen is not None:
        written.append(write_eigenvalues_csv(eigen.eigenvalues, eigen.residuals, out / "eigenvalues.csv"))
    if vtk:
        written.append(write_vtk(mesh, out / "fields.vtk", fields))
    return written


def write_curve_csv(vertices, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write("x,y\n")
            for x, y in np.asarray(vertices, dtype=float):
                fh.write(f"{float(x)!r},{float(y)!r}\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path
