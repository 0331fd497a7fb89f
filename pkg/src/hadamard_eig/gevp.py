"""Smallest eigenpairs of the symmetric pencil A x = lambda B x."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assemble import FormBundle

__all__ = [
    "GevpError",
    "RankDeficiencyError",
    "EigenPacket",
    "DENSE_LIMIT",
    "solve_gevp",
    "b_orthonormalize",
    "normalize_signs",
]

DENSE_LIMIT = 3000


class GevpError(RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (achieved relative residual {residual:.3e})"
        super().__init__(message)


class RankDeficiencyError(ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"vector {index} is linearly dependent on the preceding vectors")


@dataclass(frozen=True, eq=False)
class EigenPacket:
    """Ascending eigenvalues with B-orthonormal eigenvectors (columns).

    ``values`` are reported eigenvalues; the pencil itself has eigenvalues
    ``values + shifted_correction``.
    """

    values: np.ndarray
    vectors: np.ndarray
    t: float = 0.0
    shifted_correction: float = 0.0
    residuals: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.values)

    @property
    def pencil_values(self) -> np.ndarray:
        return self.values + self.shifted_correction


def _as_dense(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M, float)


def normalize_signs(X: np.ndarray, rel=1e-10) -> np.ndarray:
    """Flip columns so that their first non-negligible entry is positive."""
    X = np.array(X, float, copy=True)
    for j in range(X.shape[1]):
        col = X[:, j]
        big = np.flatnonzero(np.abs(col) > rel * np.max(np.abs(col)))
        if big.size and col[big[0]] < 0:
            X[:, j] = -col
    return X


def b_orthonormalize(vectors, B, rtol: float = 1e-10) -> np.ndarray:
    """Modified Gram-Schmidt in the B inner product, with one re-orthogonalization pass."""
    X = np.array(vectors, float, copy=True)
    if X.ndim == 1:
        X = X[:, None]
    out = np.empty_like(X)
    for j in range(X.shape[1]):
        v = X[:, j].copy()
        orig = np.sqrt(max(v @ (B @ v), 0.0))
        for _ in range(2):
            for i in range(j):
                q = out[:, i]
                v -= (q @ (B @ v)) * q
        nrm = np.sqrt(max(v @ (B @ v), 0.0))
        if orig == 0.0 or nrm <= rtol * orig:
            raise RankDeficiencyError(j)
        out[:, j] = v / nrm
    return out


def _residuals(A, B, lam, X):
    AX = A @ X
    BX = B @ X
    num = np.linalg.norm(AX - BX * lam, axis=0)
    den = np.linalg.norm(AX, axis=0) + np.abs(lam) * np.linalg.norm(BX, axis=0)
    return num / np.where(den > 0, den, 1.0)


def _dense_solve(A, B, k):
    A = _as_dense(A)
    B = _as_dense(B)
    try:
        return la.eigh(A, B, subset_by_index=[0, k - 1])
    except la.LinAlgError as exc:
        raise GevpError(f"factorization failed, B is not positive definite: {exc}") from None


def _subspace_iteration(A, B, k, tol, maxiter=500, seed=0):
    """Shift-invert block iteration with B-inner-product Rayleigh-Ritz."""
    n = A.shape[0]
    p = min(n, max(2 * k, k + 8))
    try:
        solve = spla.splu(sp.csc_matrix(A)).solve
    except RuntimeError as exc:
        raise GevpError(f"factorization of A failed: {exc}") from None
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    res = np.inf
    for _ in range(maxiter):
        Y = solve(B @ X)
        for _ in range(2):
            G = Y.T @ (B @ Y)
            try:
                R = la.cholesky(0.5 * (G + G.T))
            except la.LinAlgError as exc:
                raise GevpError(f"iteration lost rank: {exc}") from None
            Y = la.solve_triangular(R, Y.T, trans="T").T
        Ar = Y.T @ (A @ Y)
        theta, S = la.eigh(0.5 * (Ar + Ar.T))
        X = Y @ S
        res = float(np.max(_residuals(A, B, theta[:k], X[:, :k])))
        if res <= tol:
            return theta[:k], X[:, :k]
    raise GevpError("subspace iteration did not converge", residual=res)


def solve_gevp(bundle, k: int, tol: float = 1e-10, method: str = "auto") -> EigenPacket:
    """Smallest ``k`` eigenpairs of a :class:`FormBundle` or an ``(A, B)`` pair.

    Dense Cholesky reduction up to ``DENSE_LIMIT`` unknowns, shift-invert
    subspace iteration above. Shifted bundles report ``lambda - 1``.
    """
    if isinstance(bundle, FormBundle):
        A, B, t, corr = bundle.A, bundle.B, bundle.t, bundle.shift
    else:
        A, B = bundle
        t, corr = 0.0, 0.0
    n = A.shape[0]
    if not (1 <= k <= n):
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "iterative"
    if method == "dense":
        lam, X = _dense_solve(A, B, k)
    elif method == "iterative":
        lam, X = _subspace_iteration(A, B, k, tol)
    else:
        raise ValueError(f"unknown method {method!r}")

    X = normalize_signs(X)
    res = _residuals(A, B, lam, X)
    worst = float(np.max(res))
    if not worst <= tol:
        raise GevpError("eigenpairs failed the residual check", residual=worst)
    return EigenPacket(np.asarray(lam, float) - corr, X, float(t), corr, res)
