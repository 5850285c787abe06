"""Random problem instances shared by the test modules."""

import numpy as np

from distr.affinity import SimilarityGraph


def random_weights(rng, N):
    h = rng.random(N) + 0.1
    return h / h.sum()


def random_coupling(rng, h, n):
    R = rng.random((h.shape[0], n)) + 1e-3
    return R * (h / R.sum(axis=1))[:, None]


def random_graphs(rng, N, n, loss="l2", rank=3, uniform=False):
    """Source and target graphs with exact nonnegative factors.

    Both are Gram matrices of positive factors, so they are valid for the
    square and the KL loss and support the factored path.
    """
    A = rng.random((N, rank)) + 0.05
    B = rng.random((n, rank)) + 0.05
    h = np.full(N, 1.0 / N) if uniform else random_weights(rng, N)
    Cx = SimilarityGraph(A @ A.T, h, low_rank=A)
    Cz = SimilarityGraph(B @ B.T, np.full(n, 1.0 / n), low_rank=B)
    return Cx, Cz


def random_instance(rng, N=None, n=None, loss="l2"):
    N = N or int(rng.integers(2, 9))
    n = n or int(rng.integers(1, 5))
    Cx, Cz = random_graphs(rng, N, n, loss)
    T = random_coupling(rng, Cx.h, n)
    return Cx, Cz, T


def dense(G):
    return SimilarityGraph(G.C, G.h)
