"""Small synthetic point clouds in three dimensions."""

from typing import NamedTuple, Optional

import numpy as np

from .errors import ParameterError

DEFAULT_BLOB_SIZES = (10, 20, 30, 40, 50, 60, 70, 80, 90)


class Dataset(NamedTuple):
    X: np.ndarray
    labels: Optional[np.ndarray] = None


def circle3d(N=100, noise=0.0, seed=0):
    """Points on a unit circle tilted in 3-D, plus isotropic Gaussian noise.

    The circle is centered at the origin and lies in the plane spanned by two
    fixed orthonormal vectors, so with ``noise=0`` every point has norm one.
    """
    if int(N) != N or N < 1:
        raise ParameterError("N must be a positive integer")
    if noise < 0:
        raise ParameterError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    theta = np.sort(rng.uniform(0.0, 2 * np.pi, int(N)))
    u = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 1.0, 1.0]) / np.sqrt(2.0)
    X = np.cos(theta)[:, None] * u + np.sin(theta)[:, None] * v
    if noise > 0:
        X = X + noise * rng.standard_normal(X.shape)
    return Dataset(X, None)


def blobs(k=9, sizes=None, separation=10.0, noise=1.0, seed=0):
    """Isotropic Gaussian clusters of possibly unequal sizes.

    Cluster centers are drawn uniformly in a cube and then spread until every
    pair is at least ``separation`` apart.

    Parameters
    ----------
    k : int
        Number of clusters.
    sizes : sequence of int, optional
        Points per cluster; defaults to an unbalanced set summing to 450 when
        ``k == 9`` and to 50 per cluster otherwise.
    separation : float
        Minimum distance between two centers.
    noise : float
        Standard deviation of each cluster.
    """
    if int(k) != k or k < 1:
        raise ParameterError("k must be a positive integer")
    k = int(k)
    if sizes is None:
        sizes = DEFAULT_BLOB_SIZES if k == 9 else (50,) * k
    sizes = [int(s) for s in sizes]
    if len(sizes) != k or any(s < 1 for s in sizes):
        raise ParameterError("sizes must list k positive integers")
    if separation < 0 or noise < 0:
        raise ParameterError("separation and noise must be nonnegative")
    rng = np.random.default_rng(seed)
    # Place centers on a jittered 3-D lattice with spacing ``separation``.
    side = int(np.ceil(k ** (1.0 / 3.0)))
    grid = np.array([(a, b, c) for a in range(side) for b in range(side) for c in range(side)], float)
    pick = rng.permutation(len(grid))[:k]
    centers = separation * (grid[pick] + 0.2 * rng.uniform(-1, 1, (k, 3)))
    centers *= 1.0 / 0.6  # jitter may shrink a spacing by up to 40%
    X = np.concatenate([c + noise * rng.standard_normal((s, 3)) for c, s in zip(centers, sizes)])
    labels = np.repeat(np.arange(k), sizes)
    return Dataset(X, labels)


def generate_synthetic(kind, seed=0, **params):
    """Dispatch to :func:`circle3d` or :func:`blobs`."""
    if kind == "circle3d":
        return circle3d(seed=seed, **params)
    if kind == "blobs":
        return blobs(seed=seed, **params)
    raise ParameterError(f"unknown synthetic dataset {kind!r}")
