"""Backend selection for the hot loops.

The Cython extension ``dynlap._ckernels`` is used when it was built; otherwise
the numpy versions in ``dynlap._pykernels`` run. Set ``DYNLAP_PURE_PYTHON=1``
to force the fallback. ``DYNLAP_THREADS`` caps the worker threads.
"""
import os

import numpy as np

from . import _pykernels

VELOCITY_CODES = {"zero": 0, "double_gyre": 1, "rotation": 2}

_c = None
if os.environ.get("DYNLAP_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _c
    except ImportError:  # extension not built
        _c = None

BACKEND = "cython" if _c is not None else "python"


def n_threads() -> int:
    env = os.environ.get("DYNLAP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def p1_local(nodes, tris, backend=None):
    """Per-triangle signed areas, local stiffness (3x3) and local mass (3x3) matrices."""
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    tris = np.ascontiguousarray(tris, dtype=np.int64)
    if _use_c(backend):
        return _c.p1_local(nodes, tris)
    return _pykernels.p1_local(nodes, tris)


def rk4_advance(field, X, times, backend=None):
    """Advance points ``X`` (n, 2) through the RK4 step sequence ``times``."""
    X = np.array(X, dtype=np.float64, order="C", copy=True).reshape(-1, 2)
    times = np.ascontiguousarray(times, dtype=np.float64)
    code = VELOCITY_CODES.get(field.kernel) if field.kernel else None
    if code is not None and _use_c(backend):
        params = np.ascontiguousarray(field.params, dtype=np.float64)
        if params.size < 3:
            params = np.zeros(3)
        _c.rk4_advance(code, params, X, times, n_threads())
        return X
    return _pykernels.rk4_advance(field.velocity, X, times)


def _use_c(backend):
    if backend is None:
        return _c is not None
    if backend == "cython":
        if _c is None:
            raise RuntimeError("compiled kernels are not available")
        return True
    return False
