"""Velocity fields, RK4 trajectories and refined curve advection."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import NonFiniteState, RefinementExplosion

DEFAULT_DT = 1e-2
DEFAULT_MAX_VERTICES = 10**6


@dataclass(frozen=True)
class FlowField:
    """A time-dependent planar velocity field.

    ``velocity(t, X)`` must accept an array of points with shape ``(..., 2)``
    and return velocities of the same shape. ``kernel`` names a built-in field
    that the compiled backend can evaluate directly.
    """

    velocity: Callable[[float, np.ndarray], np.ndarray]
    time_span: tuple[float, float] = (-math.inf, math.inf)
    name: str = "custom"
    kernel: str | None = None
    params: tuple[float, ...] = ()

    def __call__(self, t, X):
        return self.velocity(t, np.asarray(X, dtype=float))

    def check_span(self, t0, t1):
        lo, hi = self.time_span
        eps = 1e-12 * max(1.0, abs(lo) if math.isfinite(lo) else 1.0, abs(hi) if math.isfinite(hi) else 1.0)
        if min(t0, t1) < lo - eps or max(t0, t1) > hi + eps:
            raise ValueError(f"[{t0}, {t1}] is outside the time span {self.time_span} of {self.name}")


def gyre_switch(t):
    """Smooth switch ``s(t) = t^2 (3 - 2t)`` between the two gyre patterns."""
    return t * t * (3.0 - 2.0 * t)


def _double_gyre_velocity(t, X):
    s = gyre_switch(t)
    x, y = X[..., 0], X[..., 1]
    pi = np.pi
    u = -((1.0 - s) * np.sin(2.0 * pi * x) * pi * np.cos(pi * y)
          + s * np.sin(pi * x) * 2.0 * pi * np.cos(2.0 * pi * y))
    v = ((1.0 - s) * 2.0 * pi * np.cos(2.0 * pi * x) * np.sin(pi * y)
         + s * pi * np.cos(pi * x) * np.sin(2.0 * pi * y))
    return np.stack([u, v], axis=-1)


def double_gyre_field() -> FlowField:
    """Rotating double gyre on the unit square, ``t`` in ``[0, 1]``.

    Stream function ``(1-s) sin(2πx) sin(πy) + s sin(πx) sin(2πy)`` with
    velocity ``(-ψ_y, ψ_x)``.
    """
    return FlowField(_double_gyre_velocity, (0.0, 1.0), "double_gyre", "double_gyre")


def rotation_field(center=(0.5, 0.5), omega: float = 1.0) -> FlowField:
    cx, cy = map(float, center)
    omega = float(omega)

    def velocity(t, X):
        return np.stack([-omega * (X[..., 1] - cy), omega * (X[..., 0] - cx)], axis=-1)

    return FlowField(velocity, (-math.inf, math.inf), "rotation", "rotation", (cx, cy, omega))


def zero_field(time_span=(0.0, 1.0)) -> FlowField:
    def velocity(t, X):
        return np.zeros_like(X, dtype=float)

    return FlowField(velocity, tuple(time_span), "identity", "zero")


BUILTIN_FIELDS = {
    "double_gyre": double_gyre_field,
    "identity": zero_field,
    "rotation": rotation_field,
}


def step_times(t0: float, t1: float, dt: float) -> np.ndarray:
    """Fixed steps of size ``dt`` from ``t0`` to ``t1``, the last one shortened."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    span = t1 - t0
    if span == 0:
        return np.array([t0], dtype=float)
    n = max(1, math.ceil(abs(span) / dt - 1e-9))
    h = math.copysign(dt, span)
    ts = t0 + h * np.arange(n + 1, dtype=float)
    ts[-1] = t1
    return ts


def integrate_many(field: FlowField, X, t0: float, t1: float, dt: float = DEFAULT_DT,
                   backend=None) -> np.ndarray:
    """Fixed-step RK4 flow map applied to each row of ``X``."""
    field.check_span(t0, t1)
    out = kernels.rk4_advance(field, X, step_times(t0, t1, dt), backend=backend)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"trajectory left the finite range between t={t0} and t={t1}")
    return out


def integrate(field: FlowField, x0, t0: float, t1: float, dt: float = DEFAULT_DT) -> np.ndarray:
    """Image of the point ``x0`` at time ``t1`` when started at ``t0``."""
    return integrate_many(field, np.asarray(x0, dtype=float).reshape(1, 2), t0, t1, dt)[0]


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """``N`` trajectories sampled at ``T`` shared times.

    ``positions`` has shape ``(N, T, 2)`` and is NaN where ``present`` is False.
    """

    times: np.ndarray
    positions: np.ndarray
    present: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[1:] != (len(times), 2):
            raise ValueError(f"positions must have shape (N, {len(times)}, 2), got {pos.shape}")
        present = np.asarray(self.present, dtype=bool)
        if present.shape != pos.shape[:2]:
            raise ValueError("present mask shape does not match positions")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(pos[present])):
            raise ValueError("positions must be finite wherever present")
        pos[~present] = np.nan
        ids = np.arange(len(pos)) if self.ids is None else np.asarray(self.ids)
        if len(ids) != len(pos):
            raise ValueError("one id per trajectory required")
        for name, val in (("times", times), ("positions", pos), ("present", present), ("ids", ids)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_trajectories(self) -> int:
        return self.positions.shape[0]

    @property
    def n_times(self) -> int:
        return len(self.times)

    def slice_points(self, l: int):
        """Present trajectory indices and their positions at slice ``l``."""
        idx = np.flatnonzero(self.present[:, l])
        return idx, self.positions[idx, l]

    def with_mask(self, present) -> "TrajectoryEnsemble":
        present = np.asarray(present, dtype=bool) & self.present
        return TrajectoryEnsemble(self.times, self.positions, present, self.ids)


def generate_trajectories(field: FlowField, seeds, times: Sequence[float],
                          dt: float = DEFAULT_DT) -> TrajectoryEnsemble:
    """Integrate every seed through ``times`` (the first time is the seeding time).

    A trajectory that becomes non-finite is marked absent from that time onward.
    """
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    times = np.asarray(times, dtype=float).reshape(-1)
    if len(seeds) == 0:
        raise ValueError("no seeds")
    field.check_span(times[0], times[-1])
    n, T = len(seeds), len(times)
    pos = np.full((n, T, 2), np.nan)
    present = np.zeros((n, T), dtype=bool)
    pos[:, 0] = seeds
    present[:, 0] = True
    alive = np.ones(n, dtype=bool)
    for l in range(1, T):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        X = kernels.rk4_advance(field, pos[idx, l - 1], step_times(times[l - 1], times[l], dt))
        ok = np.all(np.isfinite(X), axis=1)
        if not ok.all():
            warnings.warn(f"{int((~ok).sum())} trajectory(ies) became non-finite at t={times[l]}; "
                          "marked absent from there on", stacklevel=2)
            alive[idx[~ok]] = False
        pos[idx[ok], l] = X[ok]
        present[idx[ok], l] = True
    return TrajectoryEnsemble(times, pos, present)


@dataclass(frozen=True, eq=False)
class Polyline:
    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 2:
            raise ValueError("a polyline needs at least 2 vertices")
        if np.any(np.all(v[1:] == v[:-1], axis=1)):
            raise ValueError("consecutive vertices must be distinct")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)


def polyline_length(curve: Polyline) -> float:
    v = curve.vertices
    if curve.closed:
        v = np.vstack([v, v[:1]])
    return float(np.linalg.norm(np.diff(v, axis=0), axis=1).sum())


def polygon_area(vertices) -> float:
    """Signed shoelace area of a closed polygon."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


class _Chains:
    """Several polylines advected together.

    ``params`` are the vertex positions at the start time, ``X`` their current
    images, and ``link[i]`` says whether vertices ``i`` and ``i+1`` are joined.
    """

    def __init__(self, curves: Sequence[np.ndarray]):
        params, link = [], []
        for c in curves:
            c = np.asarray(c, dtype=float).reshape(-1, 2)
            if link:
                link.append(False)
            params.append(c)
            link.extend([True] * (len(c) - 1))
        self.params = np.vstack(params) if params else np.zeros((0, 2))
        self.link = np.asarray(link, dtype=bool)
        self.X = self.params.copy()
        self.owner = np.repeat(np.arange(len(curves)), [len(np.reshape(c, (-1, 2))) for c in curves])

    def segment_lengths(self):
        d = np.linalg.norm(np.diff(self.X, axis=0), axis=1)
        return np.where(self.link, d, 0.0)

    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def lengths_by_curve(self, n_curves) -> np.ndarray:
        d = self.segment_lengths()
        return np.bincount(self.owner[:-1], weights=d, minlength=n_curves) if len(d) else np.zeros(n_curves)

    def refine(self, field, history, max_seg, max_vertices):
        while True:
            long = np.flatnonzero(self.segment_lengths() > max_seg)
            if len(long) == 0:
                return
            if len(self.X) + len(long) > max_vertices:
                raise RefinementExplosion(
                    f"curve refinement needs more than {max_vertices} vertices")
            mid = 0.5 * (self.params[long] + self.params[long + 1])
            img = kernels.rk4_advance(field, mid, history) if len(history) > 1 else mid.copy()
            if not np.all(np.isfinite(img)):
                raise NonFiniteState("refined curve point left the finite range")
            at = long + 1
            self.params = np.insert(self.params, at, mid, axis=0)
            self.X = np.insert(self.X, at, img, axis=0)
            self.link = np.insert(self.link, long + 1, True)
            self.owner = np.insert(self.owner, at, self.owner[long])

    def advance(self, field, t_from, t_to):
        self.X = kernels.rk4_advance(field, self.X, np.array([t_from, t_to]))
        if not np.all(np.isfinite(self.X)):
            raise NonFiniteState(f"curve left the finite range near t={t_to}")


def advect_chains(field: FlowField, curves: Sequence[np.ndarray], times: Sequence[float],
                  dt: float = DEFAULT_DT, max_seg: float = 1e-3,
                  max_vertices: int = DEFAULT_MAX_VERTICES):
    """Advect open polylines from ``times[0]`` through ``times`` with midpoint refinement.

    Returns ``(lengths, chains)``: ``lengths[j, c]`` is the length of curve ``c``
    at ``times[j]``, and ``chains`` holds the final refined state.
    """
    if not max_seg > 0:
        raise ValueError("max_seg must be positive")
    times = np.asarray(times, dtype=float).reshape(-1)
    field.check_span(times[0], times[-1])
    chains = _Chains(curves)
    n_curves = len(curves)
    lengths = np.zeros((len(times), n_curves))
    history = [float(times[0])]
    chains.refine(field, np.array(history), max_seg, max_vertices)
    lengths[0] = chains.lengths_by_curve(n_curves)
    for j in range(1, len(times)):
        seq = step_times(times[j - 1], times[j], dt)
        for a, b in zip(seq[:-1], seq[1:]):
            chains.advance(field, a, b)
            history.append(float(b))
            chains.refine(field, np.array(history), max_seg, max_vertices)
        lengths[j] = chains.lengths_by_curve(n_curves)
    return lengths, chains


def advect_polyline(field: FlowField, curve: Polyline, t0: float, t1: float,
                    dt: float = DEFAULT_DT, max_seg: float = 1e-3,
                    max_vertices: int = DEFAULT_MAX_VERTICES) -> Polyline:
    """Image of ``curve`` at ``t1``, refined so no segment exceeds ``max_seg``.

    Long segments are split at the midpoint of their pre-image at ``t0`` and the
    new vertex is advected from ``t0``, so the result samples the true image of
    a finer parameterisation of the original curve.
    """
    v = curve.vertices
    if curve.closed:
        v = np.vstack([v, v[:1]])
    _, chains = advect_chains(field, [v], [t0, t1], dt, max_seg, max_vertices)
    X = chains.X[:-1] if curve.closed else chains.X
    return Polyline(X, curve.closed)
