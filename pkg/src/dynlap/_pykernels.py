"""Numpy implementations of the compiled kernels, used when the extension is unavailable."""
import numpy as np


def p1_local(nodes, tris):
    p0 = nodes[tris[:, 0]]
    p1 = nodes[tris[:, 1]]
    p2 = nodes[tris[:, 2]]
    area = 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))
    b = np.stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]], axis=1)
    c = np.stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]], axis=1)
    k = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area)[:, None, None]
    m = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    return area, k, m


def rk4_advance(velocity, X, times):
    """Advance every row of ``X`` through the step sequence ``times``; returns a new array."""
    X = np.array(X, dtype=float, copy=True)
    for k in range(len(times) - 1):
        t = times[k]
        h = times[k + 1] - t
        k1 = velocity(t, X)
        k2 = velocity(t + 0.5 * h, X + 0.5 * h * k1)
        k3 = velocity(t + 0.5 * h, X + 0.5 * h * k2)
        k4 = velocity(t + h, X + h * k3)
        X = X + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return X
