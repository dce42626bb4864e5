"""Generalized symmetric eigenproblem ``A v = λ M v`` for the eigenvalues nearest zero."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import FactorizationFailure, IndexOutOfRange, NoConvergence, ValidationError
from .flow import TrajectoryEnsemble

log = logging.getLogger(__name__)

DENSE_LIMIT = 64


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Eigenpairs sorted by decreasing eigenvalue.

    ``eigenvectors`` has shape ``(n_active, k)`` with M-orthonormal columns;
    ``residuals[j] = ||A v - λ M v|| / ||v||_M``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    active_nodes: np.ndarray | None = None
    n_nodes: int | None = None

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def field(self, j: int) -> np.ndarray:
        """Eigenvector ``j`` (0-based) as a nodal field on all mesh nodes."""
        if not 0 <= j < self.k:
            raise IndexOutOfRange(f"eigenfunction {j} not computed (k={self.k})")
        v = self.eigenvectors[:, j]
        if self.active_nodes is None:
            return v.copy()
        out = np.zeros(self.n_nodes)
        out[self.active_nodes] = v
        return out

    def fields(self) -> np.ndarray:
        return np.column_stack([self.field(j) for j in range(self.k)])


def _m_orthonormalize(V, M):
    G = V.T @ (M @ V)
    G = 0.5 * (G + G.T)
    L = np.linalg.cholesky(G)
    return scipy.linalg.solve_triangular(L, V.T, lower=True).T


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def solve_gevp(A, M, k: int, tol: float = 1e-10, seed: int = 0, maxiter: int | None = None,
               shift: float | None = None) -> EigenResult:
    """The ``k`` algebraically largest eigenpairs of the pencil ``(A, M)``.

    ``A`` is symmetric negative semidefinite and ``M`` symmetric positive
    definite. Uses shift-invert Lanczos at a small positive shift so that
    ``A - σM`` is definite; small problems are solved densely.
    """
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n):
        raise ValidationError("A and M must be square and of equal size")
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    if not tol > 0:
        raise ValidationError("tol must be positive")

    if n <= DENSE_LIMIT or k >= n - 1:
        w, V = scipy.linalg.eigh(A.toarray(), M.toarray())
        w, V = w[::-1][:k], V[:, ::-1][:, :k]
    else:
        scale = abs(A).max() / abs(M).max()
        sigma = tol * scale if shift is None else shift
        maxiter = 300 * k if maxiter is None else maxiter
        v0 = np.random.default_rng(seed).standard_normal(n)
        ncv = min(n, max(2 * k + 1, 20))
        for attempt in range(4):
            try:
                w, V = eigsh(A, k=k, M=M, sigma=sigma, which="LM", v0=v0, tol=tol,
                             maxiter=maxiter, ncv=ncv)
                break
            except ArpackNoConvergence as exc:
                raise NoConvergence(f"shift-invert Lanczos did not converge in {maxiter} "
                                    f"iterations ({len(exc.eigenvalues)} of {k} pairs)") from exc
            except RuntimeError as exc:  # singular factorization
                log.warning("factorization at sigma=%g failed (%s); perturbing", sigma, exc)
                sigma *= 10.0 * (1.0 + 0.1 * attempt)
        else:
            raise FactorizationFailure(f"could not factorize A - sigma*M (last sigma {sigma:g})")
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]

    V = _fix_signs(_m_orthonormalize(V, M))
    R = A @ V - (M @ V) * w
    res = np.linalg.norm(R, axis=0)
    return EigenResult(np.asarray(w, dtype=float), V, res)


def solve_system(system, k: int, tol: float = 1e-10, seed: int = 0) -> EigenResult:
    """:func:`solve_gevp` on a :class:`~dynlap.dynamic.DynLapSystem`, keeping the node map."""
    r = solve_gevp(system.A, system.M, k, tol=tol, seed=seed)
    return EigenResult(r.eigenvalues, r.eigenvectors, r.residuals,
                       np.asarray(system.active_nodes), system.n_nodes)


def pushforward_field(result: EigenResult, ensemble: TrajectoryEnsemble, k: int, l: int) -> np.ndarray:
    """Values of eigenfunction ``k`` (0-based) carried to slice ``l`` along trajectories.

    Entry ``i`` is the eigenfunction value at trajectory ``i``'s initial node,
    or NaN where trajectory ``i`` is absent at slice ``l``. Pair it with the
    slice positions ``ensemble.positions[:, l]`` for plotting.
    """
    if not 0 <= l < ensemble.n_times:
        raise IndexOutOfRange(f"slice {l} out of range (T={ensemble.n_times})")
    f = result.field(k)
    if len(f) != ensemble.n_trajectories:
        raise ValidationError("eigenvector length does not match the ensemble")
    return np.where(ensemble.present[:, l], f, np.nan)
