"""Sequential baselines: reduce then cluster, or cluster then reduce.

Both return ``(prototypes, masses, partition)`` so they can be scored the
same way as a joint fit; the partition is over the N input samples.
"""

import numpy as np

from .affinity import entropic_affinity
from .clustering import Partition, inertia, lloyd_kmeans, membership_matrix, spectral_clustering
from .engine import DistrConfig, distr_fit, output_similarity
from .errors import ConfigurationError

__all__ = [
    "Partition", "lloyd_kmeans", "spectral_clustering", "membership_matrix", "inertia",
    "dr_then_cluster", "cluster_then_dr", "centroids",
]


def _clamped_perplexity(perplexity, N):
    """Perplexity usable on ``N`` points; a third of the neighbours at most."""
    return min(perplexity, max(1.5, (N - 1) / 3.0))


def _graph_for_clustering(C, points, perplexity):
    """Use ``C`` if it is nonnegative, else an entropic affinity of ``points``."""
    if np.all(C >= 0):
        return C
    return entropic_affinity(points, _clamped_perplexity(perplexity, points.shape[0])).C


def centroids(points, labels, k, h):
    """Weighted class means ``diag(q)^-1 T^T points`` with ``T = membership(labels) * h``.

    Returns the centroids and their masses ``q``; empty clusters get a zero
    row and zero mass.
    """
    T = membership_matrix(labels, k, h)
    q = T.sum(axis=0)
    safe = np.where(q > 0, q, 1.0)
    return (T.T @ points) / safe[:, None], q


def _config(config, overrides):
    if config is None:
        return DistrConfig(**overrides)
    if overrides:
        return DistrConfig(**{**config.to_dict(), **overrides})
    return config


def dr_then_cluster(X, config=None, h=None, return_fit=False, **overrides):
    """Embed every sample, then cluster the embedding similarity.

    Runs :func:`~distr.engine.distr_fit` with ``n = N`` and a fixed diagonal
    coupling, spectral-clusters ``C_Z(Z)`` into ``config.n`` groups and
    returns the weighted centroids of the embedded points.

    Returns
    -------
    prototypes : ndarray, shape (n, d)
    masses : ndarray, shape (n,)
    partition : Partition
    fit : DistrResult
        The underlying reduction, only if ``return_fit``.
    """
    config = _config(config, overrides)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    k = config.n
    if not 1 <= k <= N:
        raise ConfigurationError(f"n={k} must lie in [1, N={N}]")
    fit = distr_fit(X, config, h=h, n=N, update_coupling=False)
    Z = fit.Z
    weights = fit.h_Z
    C = output_similarity(config.cz_kind, Z).C
    labels = spectral_clustering(_graph_for_clustering(C, Z, config.perplexity), k, seed=config.seed).labels
    prototypes, masses = centroids(Z, labels, k, weights)
    if return_fit:
        return prototypes, masses, Partition(labels, k), fit
    return prototypes, masses, Partition(labels, k)


def cluster_then_dr(X, config=None, h=None, return_fit=False, **overrides):
    """Cluster the inputs, then embed the weighted input-space centroids.

    The clustering is spectral on an entropic affinity of ``X`` with the
    configured perplexity. The ``n`` centroids, weighted by their masses,
    are then reduced with a fixed diagonal coupling.

    Returns
    -------
    prototypes : ndarray, shape (n, d)
    masses : ndarray, shape (n,)
    partition : Partition
    fit : DistrResult
        The underlying reduction, only if ``return_fit``.
    """
    config = _config(config, overrides)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    k = config.n
    if not 1 <= k <= N:
        raise ConfigurationError(f"n={k} must lie in [1, N={N}]")
    h = np.full(N, 1.0 / N) if h is None else np.asarray(h, dtype=float)

    if k == 1:
        labels = np.zeros(N, dtype=int)
    else:
        C = entropic_affinity(X, config.perplexity).C
        labels = spectral_clustering(C, k, seed=config.seed).labels
    Xc, masses = centroids(X, labels, k, h)

    if np.count_nonzero(masses) == 1:
        # a single point: nothing to optimize, keep the initial draw
        Z = np.zeros((k, config.d))
        Z[masses > 0] = np.random.default_rng(config.seed).standard_normal((1, config.d))
        if return_fit:
            return Z, masses, Partition(labels, k), None
        return Z, masses, Partition(labels, k)

    live = masses > 0
    fit = distr_fit(
        Xc[live], config, h=masses[live] / masses[live].sum(), n=int(live.sum()),
        perplexity=_clamped_perplexity(config.perplexity, int(live.sum())), update_coupling=False,
    )
    Z = np.zeros((k, config.d))
    Z[live] = fit.Z
    if return_fit:
        return Z, masses, Partition(labels, k), fit
    return Z, masses, Partition(labels, k)
