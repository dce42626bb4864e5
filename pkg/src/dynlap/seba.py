"""Sparse eigenbasis approximation (SEBA).

Alternates entrywise soft thresholding with an orthogonal (polar) rotation so
that a few leading eigenvectors are turned into sparse vectors, each supported
on one feature.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NotOrthonormal, RankCollapseWarning

DEFAULT_REJECT = -0.2


@dataclass(frozen=True, eq=False)
class SebaBasis:
    vectors: np.ndarray
    rotation: np.ndarray
    mu: float
    iterations: int
    min_values: np.ndarray

    @property
    def r(self) -> int:
        return self.vectors.shape[1]

    def max_vector(self) -> np.ndarray:
        """Pointwise maximum over the sparse vectors (useful for plotting all features at once)."""
        return self.vectors.max(axis=1)


def soft_threshold(Z, mu):
    return np.sign(Z) * np.maximum(np.abs(Z) - mu, 0.0)


def _polar(X):
    U, _, Wt = np.linalg.svd(X)
    return U @ Wt


def pivoted_rotation(V) -> np.ndarray:
    """Starting rotation from a column-pivoted QR of ``V^T``.

    The pivots pick ``r`` well-separated rows of ``V``; rotating by the polar
    factor of those rows makes each of them nearly axis aligned. The result
    transforms with ``V`` (``V Q`` gives the same ``V R^T``), so SEBA output
    does not depend on which orthonormal basis of the subspace is passed in.
    """
    from scipy.linalg import qr

    r = V.shape[1]
    _, _, piv = qr(V.T, pivoting=True, mode="economic")
    return _polar(V[piv[:r]])


def seba(V, mu: float | None = None, max_iter: int = 5000, tol: float = 1e-12,
         mass=None, R0=None) -> SebaBasis:
    """Rotate and threshold the columns of ``V`` into a sparse basis.

    Parameters
    ----------
    V : ndarray, shape (N, r)
        Orthonormal columns, in the Euclidean inner product or, if ``mass`` is
        given, in the inner product it defines.
    mu : float, optional
        Threshold; defaults to ``0.99 / sqrt(N)``.
    mass : sparse matrix, optional
        FEM mass matrix. The columns are then checked for M-orthonormality and
        re-orthonormalized in the Euclidean sense (same span) before iterating.
    R0 : ndarray or {"pivoted", "identity"}, optional
        Initial rotation. The default ``"pivoted"`` uses
        :func:`pivoted_rotation`; the identity can stall at a symmetric
        stationary point when the features are mixed evenly across columns.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    N, r = V.shape
    if r < 1 or N < r:
        raise ValueError(f"need N >= r >= 1, got shape {V.shape}")
    G = V.T @ (V if mass is None else mass @ V)
    if np.max(np.abs(G - np.eye(r))) > 1e-8:
        raise NotOrthonormal("columns of V are not orthonormal")
    if mass is not None:
        Q, Rq = np.linalg.qr(V)
        V = Q * np.sign(np.diag(Rq))
    mu = 0.99 / np.sqrt(N) if mu is None else float(mu)

    if R0 is None or (isinstance(R0, str) and R0 == "pivoted"):
        R = pivoted_rotation(V)
    elif isinstance(R0, str) and R0 == "identity":
        R = np.eye(r)
    else:
        R = np.asarray(R0, dtype=float)
    S = np.zeros_like(V)
    it = 0
    for it in range(1, max_iter + 1):
        S = soft_threshold(V @ R.T, mu)
        norms = np.linalg.norm(S, axis=0)
        norms[norms == 0] = 1.0
        S = S / norms
        R_new = _polar(S.T @ V)
        change = np.linalg.norm(R_new - R)
        R = R_new
        if change <= tol:
            break

    keep = np.any(S != 0, axis=0)
    if not keep.all():
        warnings.warn(f"{int((~keep).sum())} SEBA column(s) thresholded to zero and were dropped",
                      RankCollapseWarning, stacklevel=2)
        S, R = S[:, keep], R[keep]

    # orient so the largest-magnitude entry is positive, then scale it to 1
    idx = np.argmax(np.abs(S), axis=0)
    sgn = np.sign(S[idx, np.arange(S.shape[1])])
    S = S * sgn / np.abs(S[idx, np.arange(S.shape[1])])
    R = R * sgn[:, None]

    order = np.lexsort((np.arange(S.shape[1]), -(S >= 0.5).sum(axis=0)))
    S, R = S[:, order], R[order]
    return SebaBasis(S, R, mu, it, S.min(axis=0))


def reliability(basis: SebaBasis, reject: float = DEFAULT_REJECT):
    """Most negative entry of each column and whether it falls below ``reject``."""
    mins = np.asarray(basis.min_values, dtype=float)
    return mins, mins < reject


def span_residual(V, S) -> float:
    """``||V V^T - P_S||_F / ||V V^T||_F`` for orthonormal ``V``."""
    V = np.asarray(V, dtype=float)
    Q, _ = np.linalg.qr(np.asarray(S, dtype=float))
    # ||P - Q||^2 = ||(I - QQ^T) V||^2 + ||(I - VV^T) Q||^2, which avoids the
    # cancellation in r + s - 2 ||V^T Q||^2 and never forms N x N matrices
    a = np.linalg.norm(V - Q @ (Q.T @ V))
    b = np.linalg.norm(Q - V @ (V.T @ Q))
    return float(np.hypot(a, b) / np.sqrt(V.shape[1]))
