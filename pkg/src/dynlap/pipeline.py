"""End-to-end runs: trajectories -> dynamic Laplacian -> eigenpairs -> SEBA / Cheeger -> files."""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cheeger, dynamic, eigen, mesh, trajio
from .seba import reliability, seba
from .errors import DynlapError, IoFailure, PipelineError, ValidationError
from .flow import BUILTIN_FIELDS, generate_trajectories

log = logging.getLogger(__name__)

STAGES = ("eigs", "seba", "cheeger", "export")


@dataclass
class RunConfig:
    builtin: str | None = None
    traj: str | None = None
    grid: int = 50
    n_times: int = 11
    bc: str = "neumann"
    k: int = 2
    seba_r: int | None = None
    alpha: float | None = None
    dt: float = 1e-2
    max_seg: float = 1e-2
    tol: float = 1e-10
    cheeger: bool = False
    cheeger_grid: int = 50
    vtk: bool = False
    seed: int = 0
    output_dir: str = "dynlap_out"

    def validate(self) -> "RunConfig":
        if self.builtin is not None and self.traj is not None:
            raise ValidationError("give either a builtin flow or a trajectory file, not both")
        if self.builtin is None and self.traj is None:
            self.builtin = "double_gyre"
        if self.builtin is not None and self.builtin not in BUILTIN_FIELDS:
            raise ValidationError(f"unknown builtin {self.builtin!r}; choose from {sorted(BUILTIN_FIELDS)}")
        dynamic.BC.parse(self.bc)
        for name in ("k", "grid", "n_times", "cheeger_grid"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.grid < 3:
            raise ValidationError("grid must be >= 3")
        if self.seba_r is not None and not 1 <= self.seba_r <= self.k:
            raise ValidationError("seba_r must be between 1 and k")
        for name in ("dt", "max_seg", "tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.alpha is not None and not self.alpha > 0:
            raise ValidationError("alpha must be positive")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
        return cls.from_dict(data)


def builtin_ensemble(name: str, grid: int = 50, n_times: int = 11, dt: float = 1e-2):
    """Seeds on a ``grid x grid`` lattice of the unit square advected by a built-in flow."""
    field = BUILTIN_FIELDS[name]()
    lo, hi = field.time_span
    if not (np.isfinite(lo) and np.isfinite(hi)):
        lo, hi = 0.0, 1.0
    times = np.linspace(lo, hi, n_times)
    return field, generate_trajectories(field, mesh.grid_points(grid), times, dt)


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, Exception) and not isinstance(exc, PipelineError):
            if isinstance(exc, (DynlapError, ValueError, ArithmeticError, OSError, np.linalg.LinAlgError)):
                raise PipelineError(self.name, exc) from exc
        return False


def run_pipeline(config: RunConfig, stages=("eigs", "seba", "cheeger", "export")) -> dict:
    """Run the requested stages and return a JSON-serializable summary."""
    config.validate()
    out = Path(config.output_dir)
    summary: dict = {"config": dataclasses.asdict(config), "files": []}
    field = None
    with _Stage("load"):
        if config.traj is not None:
            ens = trajio.load_trajectories(config.traj)
            summary["source"] = str(config.traj)
        else:
            field, ens = builtin_ensemble(config.builtin, config.grid, config.n_times, config.dt)
            summary["source"] = config.builtin
    summary["n_trajectories"] = ens.n_trajectories
    summary["n_times"] = ens.n_times

    with _Stage("assemble"):
        system = dynamic.assemble_system(ens, config.bc, config.alpha)
    with _Stage("eigs"):
        res = eigen.solve_system(system, config.k, tol=config.tol, seed=config.seed)
    summary["eigenvalues"] = res.eigenvalues.tolist()
    summary["residuals"] = res.residuals.tolist()
    fields = {f"f{j + 1}": res.field(j) for j in range(res.k)}

    if "seba" in stages and config.seba_r is not None:
        with _Stage("seba"):
            basis = seba(res.eigenvectors[:, :config.seba_r], mass=system.M)
            mins, flags = reliability(basis)
        for j in range(basis.r):
            fields[f"s{j + 1}"] = system.expand(basis.vectors[:, j])
        summary["seba"] = {"min_values": mins.tolist(), "spurious": flags.tolist(),
                           "iterations": basis.iterations, "mu": basis.mu}

    if "cheeger" in stages and config.cheeger:
        with _Stage("cheeger"):
            if res.k < 2:
                raise ValidationError("the Cheeger scan needs k >= 2")
            report = cheeger.threshold_scan(
                res.field(1), system.mesh0, float(res.eigenvalues[1]), flow=field,
                times=ens.times if field is not None else None, n=2, n_grid=config.cheeger_grid,
                bc=config.bc, dt=config.dt, max_seg=config.max_seg)
            out.mkdir(parents=True, exist_ok=True)
            summary["files"].append(str(report.write_json(out / "packing.json")))
        summary["cheeger"] = {"ratios": report.ratios.tolist(), "bound": report.bound,
                              "satisfied": report.satisfied, "thresholds": report.thresholds}

    if "export" in stages:
        with _Stage("export"):
            files = trajio.export_fields(system.mesh0, fields, out, eigen=res, vtk=config.vtk)
            summary["files"] += [str(p) for p in files]
    if "matrices" in stages:
        with _Stage("export"):
            out.mkdir(parents=True, exist_ok=True)
            files = [dynamic.write_matrix_market(system.A, out / "A.mtx"),
                     dynamic.write_matrix_market(system.M, out / "M.mtx"),
                     *mesh.write_node_ele(system.mesh0, out / "mesh"),
                     mesh.write_vtk(system.mesh0, out / "mesh.vtk")]
            summary["files"] += [str(p) for p in files]
    return summary
