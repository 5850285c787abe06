"""K-means and normalized spectral clustering."""

from typing import NamedTuple

import numpy as np

from .errors import ContractViolation, DegenerateGraphError, ParameterError
from .numkit import sym_eig


class Partition(NamedTuple):
    labels: np.ndarray
    k: int


def membership_matrix(labels, k, h=None):
    """Membership coupling with row ``i`` carrying ``h_i`` in column ``labels[i]``."""
    labels = np.asarray(labels, dtype=int)
    N = labels.shape[0]
    if h is None:
        h = np.full(N, 1.0 / N)
    T = np.zeros((N, k))
    T[np.arange(N), labels] = h
    return T


def _kmeans_pp(X, k, rng):
    N = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(N)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(N)
        else:
            idx = rng.choice(N, p=d2 / total)
        centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def _assign(X, centers):
    d2 = np.sum(X * X, 1)[:, None] + np.sum(centers * centers, 1)[None, :] - 2 * X @ centers.T
    np.maximum(d2, 0, out=d2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(X.shape[0]), labels]


def lloyd_kmeans(X, k, seed=0, max_iter=300, return_inertia_trace=False):
    """Lloyd's algorithm with k-means++ seeding.

    Empty clusters are re-seeded at the point farthest from its current
    center. Iterates until the assignment stops changing or ``max_iter``.

    Returns
    -------
    partition : Partition
    centers : ndarray, shape (k, p)
    inertia_trace : list of float, only if ``return_inertia_trace``
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    if not 1 <= k <= N:
        raise ParameterError(f"k must be in [1, N={N}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(X, k, rng)
    labels, d2 = _assign(X, centers)
    trace = [float(d2.sum())]
    for _ in range(max_iter):
        for c in range(k):
            members = labels == c
            if np.any(members):
                centers[c] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(d2))
                centers[c] = X[far]
                labels[far] = c
                d2[far] = 0.0
        new_labels, d2 = _assign(X, centers)
        trace.append(float(d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    part = Partition(labels, k)
    if return_inertia_trace:
        return part, centers, trace
    return part, centers


def spectral_clustering(C, k, seed=0):
    r"""Normalized spectral clustering of a nonnegative similarity graph.

    Uses the bottom ``k`` eigenvectors of
    :math:`L_{sym} = I - D^{-1/2} C D^{-1/2}`, normalizes the rows of the
    spectral embedding and runs :func:`lloyd_kmeans` on them.

    Parameters
    ----------
    C : SimilarityGraph or array-like, shape (N, N)
    k : int
    seed : int

    Raises
    ------
    ContractViolation
        If ``C`` has negative entries or is not symmetric.
    DegenerateGraphError
        If some node has zero degree.
    """
    C = np.asarray(getattr(C, "C", C), dtype=float)
    N = C.shape[0]
    if not 1 <= k <= N:
        raise ParameterError(f"k must be in [1, N={N}], got {k}")
    if np.any(C < 0):
        raise ContractViolation("spectral clustering needs a nonnegative similarity")
    if k == 1:
        return Partition(np.zeros(N, dtype=int), 1)
    if k == N:
        return Partition(np.arange(N), N)
    deg = C.sum(axis=1)
    if np.any(deg <= 0):
        raise DegenerateGraphError("similarity graph has a zero-degree node")
    dinv = 1.0 / np.sqrt(deg)
    S = dinv[:, None] * C * dinv[None, :]
    # bottom eigenvectors of I - S are the top eigenvectors of S
    _, V = sym_eig(0.5 * (S + S.T))
    U = V[:, :k]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    U = U / np.where(norms > 0, norms, 1.0)
    part, _ = lloyd_kmeans(U, k, seed=seed)
    return part


def inertia(X, labels, centers):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return float(np.sum((X - centers[labels]) ** 2))

