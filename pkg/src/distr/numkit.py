"""Dense numerical primitives: Jacobi eigensolver, Sinkhorn scaling, distances."""

from typing import NamedTuple

import numba
import numpy as np

from .errors import ContractViolation, ConvergenceError, InfeasibleError


class EigDecomposition(NamedTuple):
    """Full symmetric eigendecomposition, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_finite_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ContractViolation(f"{name} must be a 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return A


@numba.njit(cache=True)
def _jacobi_sweeps(A, V, threshold, max_sweeps):
    N = A.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(N):
            for j in range(i + 1, N):
                off += 2.0 * A[i, j] * A[i, j]
        off = np.sqrt(off)
        if off <= threshold:
            return sweep, off
        if sweep == max_sweeps:
            return -1, off
        for p in range(N - 1):
            for q in range(p + 1, N):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                tau = (aqq - app) / (2.0 * apq)
                sign = 1.0 if tau >= 0.0 else -1.0
                t = sign / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(N):
                    if k != p and k != q:
                        akp = A[k, p]
                        akq = A[k, q]
                        nkp = c * akp - s * akq
                        nkq = s * akp + c * akq
                        A[k, p] = nkp
                        A[p, k] = nkp
                        A[k, q] = nkq
                        A[q, k] = nkq
                A[p, p] = c * c * app - 2.0 * c * s * apq + s * s * aqq
                A[q, q] = s * s * app + 2.0 * c * s * apq + c * c * aqq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(N):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return -1, off


def sym_eig(A, tol=1e-10, max_sweeps=100):
    r"""Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    A : array-like, shape (N, N)
        Symmetric matrix (asymmetry above 1e-12 is rejected).
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm drops below
        ``tol * ||A||_F``.
    max_sweeps : int
        Iteration limit.

    Returns
    -------
    EigDecomposition
        ``eigenvalues`` in descending order and orthonormal ``eigenvectors``
        (as columns) with ``A = V diag(w) V^T``.

    Raises
    ------
    ContractViolation
        If ``A`` is not square, not finite or not symmetric.
    ConvergenceError
        If ``max_sweeps`` sweeps do not reach the tolerance.
    """
    A = _as_finite_matrix(A)
    N = A.shape[0]
    if A.shape[1] != N:
        raise ContractViolation(f"A must be square, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if N and np.max(np.abs(A - A.T)) > 1e-12 * scale:
        raise ContractViolation("A is not symmetric")

    A = np.ascontiguousarray(0.5 * (A + A.T))
    V = np.eye(N)
    if N > 1:
        threshold = tol * np.linalg.norm(A)
        sweeps, off = _jacobi_sweeps(A, V, threshold, max_sweeps)
        if sweeps < 0:
            raise ConvergenceError(
                f"Jacobi eigensolver did not converge in {max_sweeps} sweeps", off
            )
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return EigDecomposition(w[order], V[:, order])


def sinkhorn_normalize(K, row_marginal, col_marginal, tol=1e-9, max_iter=10000):
    """Scale a nonnegative matrix to prescribed row and column sums.

    Returns ``diag(u) K diag(v)``. Zero entries of ``K`` stay zero.

    Raises
    ------
    InfeasibleError
        If a row or column of ``K`` is identically zero while its target
        marginal is positive.
    ConvergenceError
        If the row-marginal residual is still above ``tol`` after
        ``max_iter`` iterations.
    """
    K = _as_finite_matrix(K, "K")
    r = np.asarray(row_marginal, dtype=float)
    c = np.asarray(col_marginal, dtype=float)
    if r.shape != (K.shape[0],) or c.shape != (K.shape[1],):
        raise ContractViolation("marginal lengths do not match the shape of K")
    if np.any(K < 0) or np.any(r < 0) or np.any(c < 0):
        raise ContractViolation("K and the marginals must be nonnegative")
    if abs(r.sum() - c.sum()) > 1e-12 * max(1.0, r.sum()):
        raise ContractViolation("row and column marginals have different totals")
    if np.any((K.sum(1) == 0) & (r > 0)) or np.any((K.sum(0) == 0) & (c > 0)):
        raise InfeasibleError("K has an empty row or column with positive target mass")

    u = np.ones_like(r)
    v = np.ones_like(c)
    residual = np.inf
    for _ in range(max_iter):
        Kv = K @ v
        u = np.divide(r, Kv, out=np.zeros_like(r), where=Kv > 0)
        Ktu = K.T @ u
        v = np.divide(c, Ktu, out=np.zeros_like(c), where=Ktu > 0)
        residual = np.max(np.abs(u * (K @ v) - r))
        if residual < tol:
            return u[:, None] * K * v[None, :]
    raise ConvergenceError(f"Sinkhorn did not converge in {max_iter} iterations", residual)


def pairwise_sqdist(X):
    """Squared Euclidean distance matrix between the rows of ``X``."""
    X = _as_finite_matrix(X, "X")
    sq = np.einsum("ij,ij->i", X, X)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D
