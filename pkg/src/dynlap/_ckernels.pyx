# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: P1 element matrices and fixed-step RK4 for the built-in fields."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sin, cos, M_PI

cnp.import_array()

# velocity codes shared with dynlap.kernels
cdef enum:
    ZERO = 0
    DOUBLE_GYRE = 1
    ROTATION = 2


def p1_local(const double[:, ::1] nodes, const long[:, ::1] tris):
    cdef Py_ssize_t m = tris.shape[0], e, i, j
    cdef double x0, y0, x1, y1, x2, y2, area, a4
    cdef double b[3]
    cdef double c[3]
    out_area = np.empty(m, dtype=np.float64)
    out_k = np.empty((m, 3, 3), dtype=np.float64)
    out_m = np.empty((m, 3, 3), dtype=np.float64)
    cdef double[::1] A = out_area
    cdef double[:, :, ::1] K = out_k
    cdef double[:, :, ::1] Mm = out_m
    for e in range(m):
        x0 = nodes[tris[e, 0], 0]; y0 = nodes[tris[e, 0], 1]
        x1 = nodes[tris[e, 1], 0]; y1 = nodes[tris[e, 1], 1]
        x2 = nodes[tris[e, 2], 0]; y2 = nodes[tris[e, 2], 1]
        area = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
        A[e] = area
        b[0] = y1 - y2; b[1] = y2 - y0; b[2] = y0 - y1
        c[0] = x2 - x1; c[1] = x0 - x2; c[2] = x1 - x0
        a4 = 4.0 * area
        for i in range(3):
            for j in range(3):
                K[e, i, j] = (b[i] * b[j] + c[i] * c[j]) / a4
                Mm[e, i, j] = area / 12.0 * (2.0 if i == j else 1.0)
    return out_area, out_k, out_m


cdef inline void _vel(int code, const double[::1] p, double t, double x, double y,
                      double* u, double* v) noexcept nogil:
    cdef double s, a, sx, cx, sy, cy
    if code == DOUBLE_GYRE:
        s = t * t * (3.0 - 2.0 * t)
        a = 1.0 - s
        # double-angle identities halve the libm calls
        sx = sin(M_PI * x); cx = cos(M_PI * x)
        sy = sin(M_PI * y); cy = cos(M_PI * y)
        u[0] = -M_PI * (2.0 * a * sx * cx * cy + 2.0 * s * sx * (2.0 * cy * cy - 1.0))
        v[0] = M_PI * (2.0 * a * (2.0 * cx * cx - 1.0) * sy + 2.0 * s * cx * sy * cy)
    elif code == ROTATION:
        u[0] = -p[2] * (y - p[1])
        v[0] = p[2] * (x - p[0])
    else:
        u[0] = 0.0
        v[0] = 0.0


cdef inline void _rk4_point(int code, const double[::1] p, const double[::1] times,
                            double* px, double* py) noexcept nogil:
    cdef Py_ssize_t k
    cdef double t, h, x = px[0], y = py[0], u1, v1, u2, v2, u3, v3, u4, v4
    for k in range(times.shape[0] - 1):
        t = times[k]
        h = times[k + 1] - t
        _vel(code, p, t, x, y, &u1, &v1)
        _vel(code, p, t + 0.5 * h, x + 0.5 * h * u1, y + 0.5 * h * v1, &u2, &v2)
        _vel(code, p, t + 0.5 * h, x + 0.5 * h * u2, y + 0.5 * h * v2, &u3, &v3)
        _vel(code, p, t + h, x + h * u3, y + h * v3, &u4, &v4)
        x = x + h / 6.0 * (u1 + 2.0 * u2 + 2.0 * u3 + u4)
        y = y + h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
    px[0] = x
    py[0] = y


def rk4_advance(int code, const double[::1] params, double[:, ::1] X, const double[::1] times,
                int n_threads=1):
    """Advance every row of ``X`` through the step sequence ``times`` in place.

    Points are independent, so the result does not depend on ``n_threads``.
    """
    cdef Py_ssize_t i, n = X.shape[0]
    with nogil:
        for i in prange(n, num_threads=n_threads, schedule="static"):
            _rk4_point(code, params, times, &X[i, 0], &X[i, 1])
