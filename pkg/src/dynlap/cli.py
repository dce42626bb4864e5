"""``dynlap`` command line.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import pipeline, trajio
from .errors import DynlapError, ValidationError

SUBCOMMAND_STAGES = {
    "run": ("eigs", "seba", "cheeger", "export"),
    "eigs": ("eigs", "export"),
    "seba": ("eigs", "seba", "export"),
    "cheeger": ("eigs", "cheeger"),
    "export": ("eigs", "export", "matrices"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--builtin", help="built-in flow: double_gyre, identity, rotation")
    src.add_argument("--traj", help="trajectory CSV with header id,t,x,y")
    p.add_argument("--config", help="JSON config; command-line flags override it")
    p.add_argument("--bc", choices=["neumann", "dirichlet"])
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float, help="alpha-shape circumradius cutoff for meshing")
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--grid", type=int, help="seeds per side for built-in flows")
    p.add_argument("--times", dest="n_times", type=int, help="number of time slices")
    p.add_argument("--dt", type=float)
    p.add_argument("--max-seg", dest="max_seg", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--vtk", action="store_true", default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynlap", description="Finite-time coherent sets from trajectories.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    g = sub.add_parser("generate", help="write trajectories of a built-in flow to CSV")
    _common(g)
    for name, helptext in [("run", "full pipeline"), ("eigs", "eigenpairs only"),
                           ("seba", "eigenpairs + SEBA"), ("cheeger", "eigenpairs + Cheeger scan"),
                           ("export", "mesh, matrices and fields")]:
        p = sub.add_parser(name, help=helptext)
        _common(p)
        if name in ("run", "seba"):
            p.add_argument("--seba-r", dest="seba_r", type=int)
        if name in ("run", "cheeger"):
            p.add_argument("--cheeger-grid", dest="cheeger_grid", type=int)
        if name == "run":
            p.add_argument("--cheeger", action="store_true", help="also run the threshold scan")
    return parser


def _config(args) -> pipeline.RunConfig:
    base = {}
    if args.config:
        base = dataclasses.asdict(pipeline.RunConfig.from_json(args.config))
    for key in ("builtin", "traj", "bc", "k", "alpha", "output_dir", "grid", "n_times", "dt",
                "max_seg", "tol", "seed", "vtk", "seba_r", "cheeger_grid"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    if args.builtin is not None:
        base["traj"] = None
    if args.traj is not None:
        base["builtin"] = None
    if args.command == "seba" and base.get("seba_r") is None:
        base["seba_r"] = base.get("k", pipeline.RunConfig.k)
    if args.command == "cheeger" or getattr(args, "cheeger", False):
        base["cheeger"] = True
    return pipeline.RunConfig.from_dict(base).validate()


def _generate(cfg: pipeline.RunConfig) -> dict:
    if cfg.builtin is None:
        raise ValidationError("generate needs --builtin")
    _, ens = pipeline.builtin_ensemble(cfg.builtin, cfg.grid, cfg.n_times, cfg.dt)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = trajio.save_trajectories(ens, out / "trajectories.csv")
    return {"files": [str(path)], "n_trajectories": ens.n_trajectories, "n_times": ens.n_times}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                         format="%(levelname)s %(name)s: %(message)s")
    try:
        with pipeline._Stage("config"):
            cfg = _config(args)
        if args.command == "generate":
            summary = _generate(cfg)
        else:
            summary = pipeline.run_pipeline(cfg, SUBCOMMAND_STAGES[args.command])
    except DynlapError as exc:
        print(f"dynlap {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"dynlap {args.command}: [io] {exc}", file=sys.stderr)
        return 3
    _print_summary(summary)
    return 0


def _print_summary(summary: dict) -> None:
    if "eigenvalues" in summary:
        print("k,lambda,residual")
        for j, (lam, res) in enumerate(zip(summary["eigenvalues"], summary["residuals"]), start=1):
            print(f"{j},{lam:.10g},{res:.3g}")
    if "seba" in summary:
        s = summary["seba"]
        for j, (m, bad) in enumerate(zip(s["min_values"], s["spurious"]), start=1):
            print(f"seba s{j}: min={m + 0.0:.4g}{'  SPURIOUS' if bad else ''}")
    if "cheeger" in summary:
        c = summary["cheeger"]
        print(f"cheeger: ratios={[round(r, 4) for r in c['ratios']]} bound={c['bound']:.4f} "
              f"satisfied={c['satisfied']}")
    for f in summary.get("files", []):
        print(f"wrote {f}")
    if not summary.get("files") and "eigenvalues" not in summary:
        print(json.dumps(summary))


if __name__ == "__main__":
    sys.exit(main())
