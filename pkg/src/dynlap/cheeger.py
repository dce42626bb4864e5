"""Nodal domains, superlevel-set packings and static/dynamic Cheeger ratios.

A node set selects the triangles whose three vertices all belong to it; its
boundary is made of the mesh edges separating selected triangles from the
rest (or from the outside of the mesh).
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.sparse.csgraph import connected_components

from .dynamic import BC
from .errors import (AllZeroField, EmptySet, IoFailure, PositiveEigenvalue, TooFewNodalDomains,
                     ZeroArea)
from .flow import DEFAULT_DT, FlowField, advect_chains
from .mesh import TriMesh


@dataclass(frozen=True, eq=False)
class NodeSet:
    nodes: np.ndarray
    mesh: TriMesh = field(repr=False)
    label: str = ""

    def __post_init__(self):
        nodes = np.unique(np.asarray(self.nodes, dtype=np.int64))
        if len(nodes) == 0:
            raise EmptySet(f"node set {self.label!r} is empty")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_mask(cls, mask, mesh, label=""):
        return cls(np.flatnonzero(mask), mesh, label)

    @cached_property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.mesh.n_nodes, dtype=bool)
        m[self.nodes] = True
        return m

    @cached_property
    def elements(self) -> np.ndarray:
        return np.all(self.mask[self.mesh.triangles], axis=1)

    @property
    def area(self) -> float:
        return float(self.mesh.areas[self.elements].sum())

    def boundary_edges(self, interior_only: bool = True) -> np.ndarray:
        """Edges of the selected region; with ``interior_only`` drop those on the mesh boundary."""
        edges, counts, tri_edges = self.mesh.edges()
        inside = np.bincount(tri_edges[self.elements].ravel(), minlength=len(edges))
        sel = inside == 1
        if interior_only:
            sel &= counts == 2
        return edges[sel]

    def boundary_length(self, interior_only: bool = True) -> float:
        e = self.boundary_edges(interior_only)
        p = self.mesh.nodes
        return float(np.linalg.norm(p[e[:, 0]] - p[e[:, 1]], axis=1).sum())

    def boundary_polylines(self, interior_only: bool = True) -> list[np.ndarray]:
        """Boundary edges chained into node-index paths (closed paths repeat their first node)."""
        return chain_edges(self.boundary_edges(interior_only))

    def boundary_curves(self, interior_only: bool = True) -> list[np.ndarray]:
        """Boundary as coordinate polylines."""
        p = self.mesh.nodes
        return [p[path] for path in self.boundary_polylines(interior_only)]


@dataclass(frozen=True, eq=False)
class LevelSet(NodeSet):
    """Region ``{x : g_h(x) >= 0}`` of the P1 interpolant of nodal values ``g``.

    Only triangles with a vertex in ``nodes`` contribute, which confines the
    region to one nodal domain. The boundary is the piecewise-linear contour
    ``g_h = 0`` (plus, when requested, the parts of the mesh boundary where
    ``g_h >= 0``).
    """

    level_values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        super().__post_init__()
        g = np.asarray(self.level_values, dtype=float)
        if g.shape != (self.mesh.n_nodes,):
            raise ValueError("level_values must have one value per mesh node")
        object.__setattr__(self, "level_values", g)

    @cached_property
    def _geometry(self):
        mesh, g = self.mesh, self.level_values
        tris = mesh.triangles
        edges, counts, tri_edges = mesh.edges()
        G = g[tris]
        inside = G >= 0
        k = inside.sum(axis=1)
        sel = self.mask[tris].any(axis=1) & (k > 0)
        areas = np.abs(mesh.areas)
        area = float(areas[sel & (k == 3)].sum())

        part = np.flatnonzero(sel & (k < 3))
        kp = k[part]
        odd = np.where(kp == 1, np.argmax(inside[part], axis=1), np.argmin(inside[part], axis=1))
        o = tris[part, odd]
        q1 = tris[part, (odd + 1) % 3]
        q2 = tris[part, (odd + 2) % 3]
        u1 = g[o] / (g[o] - g[q1])
        u2 = g[o] / (g[o] - g[q2])
        frac = u1 * u2
        area += float(np.sum(areas[part] * np.where(kp == 1, frac, 1.0 - frac)))
        # side i of a triangle is opposite vertex i
        e1 = tri_edges[part, (odd + 2) % 3]
        e2 = tri_edges[part, (odd + 1) % 3]

        # crossing point on every edge with endpoints on opposite sides
        gi, gj = g[edges[:, 0]], g[edges[:, 1]]
        cut = (gi >= 0) != (gj >= 0)
        t = np.zeros(len(edges))
        t[cut] = gi[cut] / (gi[cut] - gj[cut])
        P = mesh.nodes
        cross = P[edges[:, 0]] + t[:, None] * (P[edges[:, 1]] - P[edges[:, 0]])
        n = mesh.n_nodes
        interior_pairs = np.column_stack([n + e1, n + e2])

        # pieces of the mesh boundary inside the region
        bsel = np.zeros(len(edges), dtype=bool)
        bsel[tri_edges[sel].ravel()] = True
        bsel &= counts == 1
        be = np.flatnonzero(bsel)
        a_in = g[edges[be, 0]] >= 0
        b_in = g[edges[be, 1]] >= 0
        both = be[a_in & b_in]
        only_a = be[a_in & ~b_in]
        only_b = be[~a_in & b_in]
        boundary_pairs = np.vstack([
            edges[both],
            np.column_stack([edges[only_a, 0], n + only_a]),
            np.column_stack([edges[only_b, 1], n + only_b]),
        ]).astype(np.int64)
        coords = np.vstack([P, cross])
        return area, interior_pairs.astype(np.int64), boundary_pairs, coords

    @property
    def area(self) -> float:
        return self._geometry[0]

    def _pairs(self, interior_only):
        _, inner, outer, _ = self._geometry
        return inner if interior_only else np.vstack([inner, outer])

    def boundary_length(self, interior_only: bool = True) -> float:
        coords = self._geometry[3]
        pr = self._pairs(interior_only)
        return float(np.linalg.norm(coords[pr[:, 0]] - coords[pr[:, 1]], axis=1).sum())

    def boundary_edges(self, interior_only: bool = True) -> np.ndarray:
        raise NotImplementedError("a level set boundary is a contour, not a set of mesh edges; "
                                  "use boundary_curves")

    def boundary_polylines(self, interior_only: bool = True) -> list[np.ndarray]:
        raise NotImplementedError("use boundary_curves")

    def boundary_curves(self, interior_only: bool = True) -> list[np.ndarray]:
        coords = self._geometry[3]
        return [coords[path] for path in chain_edges(self._pairs(interior_only))]


def chain_edges(edges) -> list[np.ndarray]:
    """Split an edge list into paths that use every edge once."""
    adj = defaultdict(list)
    for k, (a, b) in enumerate(np.asarray(edges).reshape(-1, 2)):
        adj[int(a)].append((int(b), k))
        adj[int(b)].append((int(a), k))
    used = set()
    paths = []
    # open chains start at odd-degree nodes; what remains are cycles
    starts = sorted(n for n, nb in adj.items() if len(nb) % 2) + sorted(adj)
    for s in starts:
        while any(k not in used for _, k in adj[s]):
            path = [s]
            cur = s
            while True:
                nxt = next(((b, k) for b, k in adj[cur] if k not in used), None)
                if nxt is None:
                    break
                used.add(nxt[1])
                cur = nxt[0]
                path.append(cur)
            paths.append(np.asarray(path, dtype=np.int64))
    return paths


def nodal_domains(values, mesh: TriMesh) -> list[NodeSet]:
    """Connected components of the strictly positive and strictly negative nodes.

    Zero nodes belong to no domain. Domains are returned largest first (by node
    count) and labelled ``"+0"``, ``"-1"``, ... with sign and rank.
    """
    f = np.asarray(values, dtype=float)
    if f.shape != (mesh.n_nodes,):
        raise ValueError(f"field has shape {f.shape}, expected ({mesh.n_nodes},)")
    if not np.all(np.isfinite(f)):
        raise ValueError("field must be finite")
    if not np.any(f != 0):
        raise AllZeroField("field is identically zero")
    adj = mesh.adjacency()
    found = []
    for sign, mask in ((1, f > 0), (-1, f < 0)):
        idx = np.flatnonzero(mask)
        if len(idx) == 0:
            continue
        n, lab = connected_components(adj[idx][:, idx], directed=False)
        for c in range(n):
            found.append((sign, idx[lab == c]))
    found.sort(key=lambda t: (-len(t[1]), t[1][0]))
    return [NodeSet(nodes, mesh, f"{'+' if s > 0 else '-'}{i}") for i, (s, nodes) in enumerate(found)]


def superlevel_packing(values, mesh: TriMesh, thresholds: Sequence[float],
                       domains: list[NodeSet] | None = None) -> list[NodeSet]:
    """``{x in N_k : f(x)^2 >= c_k}`` for the ``n = len(thresholds)`` largest nodal domains.

    The sets are superlevel regions of the piecewise-linear field itself
    (:class:`LevelSet`), so their boundaries follow its contours rather than
    mesh edges.
    """
    f = np.asarray(values, dtype=float)
    thresholds = [float(c) for c in thresholds]
    if any(c < 0 for c in thresholds):
        raise ValueError("thresholds must be nonnegative")
    domains = nodal_domains(f, mesh) if domains is None else domains
    n = len(thresholds)
    if len(domains) < n:
        raise TooFewNodalDomains(f"field has {len(domains)} nodal domain(s), need {n}")
    return [_superlevel(f, mesh, dom, c) for dom, c in zip(domains[:n], thresholds)]


def _superlevel(f, mesh, dom, c) -> LevelSet:
    keep = dom.nodes[f[dom.nodes] ** 2 >= c]
    if len(keep) == 0:
        raise EmptySet(f"threshold {c:g} empties nodal domain {dom.label}")
    sign = 1.0 if f[dom.nodes[0]] > 0 else -1.0
    return LevelSet(keep, mesh, dom.label, level_values=sign * f - np.sqrt(c))


def static_cheeger_ratio(nodeset: NodeSet, bc="neumann") -> float:
    """Boundary length over area; Neumann counts only boundary inside the mesh."""
    bc = BC.parse(bc)
    area = nodeset.area
    if area <= 0:
        raise ZeroArea(f"node set {nodeset.label!r} contains no complete triangle")
    return nodeset.boundary_length(interior_only=bc is BC.NEUMANN) / area


def _trapezoid_mean(times, values):
    times = np.asarray(times, dtype=float)
    if len(times) == 1:
        return np.asarray(values)[0]
    return trapezoid(values, times, axis=0) / (times[-1] - times[0])


def _chains_for(nodeset, bc):
    return nodeset.boundary_curves(interior_only=bc is BC.NEUMANN)


def dynamic_cheeger_ratios(nodesets: Sequence[NodeSet], flow: FlowField, times, bc="neumann",
                           dt: float = DEFAULT_DT, max_seg: float = 1e-3,
                           max_vertices: int = 10**6) -> np.ndarray:
    """Time-averaged evolved boundary length over area for several node sets at once.

    Boundaries are advected (with refinement) to every time in ``times`` and
    their lengths averaged with the trapezoid rule. Areas are taken at the
    initial time, since the flows are assumed volume preserving. Sets without a
    complete triangle get ``inf``.
    """
    bc = BC.parse(bc)
    times = np.asarray(times, dtype=float)
    curves, owner = [], []
    areas = np.array([s.area for s in nodesets])
    for i, s in enumerate(nodesets):
        if areas[i] <= 0:
            continue
        c = _chains_for(s, bc)
        curves += c
        owner += [i] * len(c)
    ratios = np.full(len(nodesets), np.inf)
    lengths_t = np.zeros((len(times), len(nodesets)))
    if curves:
        lengths, _ = advect_chains(flow, curves, times, dt, max_seg, max_vertices)
        for c, i in enumerate(owner):
            lengths_t[:, i] += lengths[:, c]
    ok = areas > 0
    ratios[ok] = _trapezoid_mean(times, lengths_t[:, ok]) / areas[ok]
    return ratios


def dynamic_cheeger_ratio(nodeset: NodeSet, flow: FlowField, times, bc="neumann",
                          dt: float = DEFAULT_DT, max_seg: float = 1e-3,
                          max_vertices: int = 10**6) -> float:
    """Dynamic Cheeger ratio of a single node set; see :func:`dynamic_cheeger_ratios`."""
    if nodeset.area <= 0:
        raise ZeroArea(f"node set {nodeset.label!r} contains no complete triangle")
    return float(dynamic_cheeger_ratios([nodeset], flow, times, bc, dt, max_seg, max_vertices)[0])


@dataclass(frozen=True)
class BoundCheck:
    bound: float
    max_ratio: float
    n: int
    satisfied: bool


def check_bound(max_ratio: float, lam: float, n: int = 2) -> BoundCheck:
    """Compare a packing ratio with ``sqrt(-2 λ)``."""
    if lam > 0:
        raise PositiveEigenvalue(f"eigenvalue {lam} is positive")
    bound = math.sqrt(-2.0 * lam)
    return BoundCheck(bound, float(max_ratio), int(n), bool(max_ratio <= bound))


@dataclass(eq=False)
class PackingReport:
    sets: list
    ratios: np.ndarray
    bound: float | None = None
    eigenvalue: float | None = None
    thresholds: list | None = None
    kind: str = "dynamic"
    extra: dict = field(default_factory=dict)

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    @property
    def satisfied(self) -> bool | None:
        if self.bound is None:
            return None
        return bool(self.max_ratio <= self.bound)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sets": [s.nodes.tolist() for s in self.sets],
            "labels": [s.label for s in self.sets],
            "ratios": [float(r) for r in self.ratios],
            "max_ratio": self.max_ratio,
            "eigenvalue": self.eigenvalue,
            "bound": self.bound,
            "satisfied": self.satisfied,
            "thresholds": self.thresholds,
            **self.extra,
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        try:
            path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return path


def threshold_grid(values, domain: NodeSet, n_grid: int = 50, lo: float = 1e-4) -> np.ndarray:
    """Logarithmic grid of squared-value thresholds from ``lo * max`` to ``max`` over a domain."""
    top = float(np.max(np.asarray(values)[domain.nodes] ** 2))
    return np.geomspace(lo * top, top, n_grid)


def threshold_scan(values, mesh: TriMesh, lam: float, flow: FlowField | None = None, times=None,
                   n: int = 2, n_grid: int = 50, bc="neumann", dt: float = DEFAULT_DT,
                   max_seg: float = 1e-2) -> PackingReport:
    """Search superlevel-set packings of ``values**2`` for the smallest worst-case ratio.

    Each of the ``n`` largest nodal domains gets a logarithmic grid of
    ``n_grid`` thresholds. With a ``flow`` the dynamic ratio over ``times`` is
    used, otherwise the static one. The returned report holds the best packing
    and, in ``extra``, the fraction of grid points meeting ``sqrt(-2 λ)``.
    """
    bc = BC.parse(bc)
    f = np.asarray(values, dtype=float)
    domains = nodal_domains(f, mesh)
    if len(domains) < n:
        raise TooFewNodalDomains(f"field has {len(domains)} nodal domain(s), need {n}")
    per_domain = []
    grids = []
    for dom in domains[:n]:
        grid = threshold_grid(f, dom, n_grid)
        grids.append(grid)
        sets = [_superlevel(f, mesh, dom, c) for c in grid]
        if flow is None:
            r = np.array([static_cheeger_ratio(s, bc) if s.area > 0 else np.inf for s in sets])
        else:
            r = dynamic_cheeger_ratios(sets, flow, times, bc, dt, max_seg)
        per_domain.append((sets, np.arange(len(sets)), r))

    # worst ratio over the packing for every threshold combination
    worst = per_domain[0][2]
    for _, _, r in per_domain[1:]:
        worst = np.maximum.outer(worst, r)
    best = np.unravel_index(np.argmin(worst), worst.shape)
    sets = [per_domain[k][0][per_domain[k][1][best[k]]] for k in range(n)]
    ratios = np.array([per_domain[k][2][best[k]] for k in range(n)])
    check = check_bound(float(ratios.max()), lam, n)
    return PackingReport(
        sets, ratios, bound=check.bound, eigenvalue=float(lam),
        thresholds=[float(grids[k][best[k]]) for k in range(n)],
        kind="static" if flow is None else "dynamic",
        extra={"feasible_fraction": float(np.mean(worst <= check.bound))},
    )
