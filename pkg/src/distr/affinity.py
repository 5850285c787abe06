"""Input and output similarity graphs ``C_X(X)`` and ``C_Z(Z)``."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractViolation, ConvergenceError, ParameterError
from .numkit import pairwise_sqdist

KINDS = ("gram", "mds_gram", "entropic_affinity", "student", "custom")


@dataclass
class SimilarityGraph:
    """A weighted similarity graph.

    Attributes
    ----------
    C : ndarray, shape (n, n)
        Symmetric similarity matrix.
    h : ndarray, shape (n,)
        Node weights, a probability vector.
    low_rank : ndarray, shape (n, r), optional
        Exact factor with ``C = low_rank @ low_rank.T``.
    kind : str
        Which builder produced the graph.
    """

    C: np.ndarray
    h: np.ndarray
    low_rank: Optional[np.ndarray] = None
    kind: str = "custom"
    perplexity: Optional[float] = field(default=None, repr=False)

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        n = self.C.shape[0]
        if self.C.ndim != 2 or self.C.shape != (n, n):
            raise ContractViolation(f"C must be square, got shape {self.C.shape}")
        if self.h.shape != (n,):
            raise ContractViolation("weight vector length does not match C")
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown graph kind {self.kind!r}")
        if np.any(self.h < 0) or abs(self.h.sum() - 1.0) > 1e-12 * max(1, n):
            raise ContractViolation("weights must be nonnegative and sum to 1")
        if self.low_rank is not None:
            self.low_rank = np.asarray(self.low_rank, dtype=float)
            if self.low_rank.ndim != 2 or self.low_rank.shape[0] != n:
                raise ContractViolation("low-rank factor has the wrong number of rows")

    @property
    def n(self):
        return self.C.shape[0]

    @classmethod
    def from_matrix(cls, C, h=None, low_rank=None):
        """Wrap a user supplied matrix; ``h`` defaults to uniform weights."""
        C = np.asarray(C, dtype=float)
        if h is None:
            h = np.full(C.shape[0], 1.0 / C.shape[0])
        if C.ndim == 2 and C.shape[0] == C.shape[1] and not np.allclose(C, C.T, atol=1e-10, rtol=0):
            raise ContractViolation("C must be symmetric")
        return cls(C, h, low_rank=low_rank, kind="custom")


def _uniform(n):
    return np.full(n, 1.0 / n)


def _check_data(X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ContractViolation(f"{name} must be a non-empty 2-D array")
    if not np.all(np.isfinite(X)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return X


def linear_gram(X):
    """Inner-product graph ``C = X X^T``, carrying ``X`` as its exact factor."""
    X = _check_data(X)
    return SimilarityGraph(X @ X.T, _uniform(X.shape[0]), low_rank=X.copy(), kind="gram")


def mds_gram(D):
    r"""Classical MDS Gram matrix :math:`-\frac12 H D H` of squared distances."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
        raise ContractViolation("D must be a non-empty square matrix")
    scale = max(1.0, float(np.max(np.abs(D))))
    if np.max(np.abs(D - D.T)) > 1e-10 * scale:
        raise ContractViolation("D is not symmetric")
    if np.any(np.abs(np.diag(D)) > 1e-10 * scale) or np.any(D < -1e-10 * scale):
        raise ContractViolation("D must be nonnegative with a zero diagonal")
    N = D.shape[0]
    # H D H without forming H: subtract row and column means, add back the grand mean.
    row = D.mean(axis=1)
    C = -0.5 * (D - row[:, None] - row[None, :] + D.mean())
    C = 0.5 * (C + C.T)
    return SimilarityGraph(C, _uniform(N), kind="mds_gram")


def _row_entropy_search(D, target, tol, max_iter):
    """Per-row Gaussian bandwidth by geometric bisection on ``sigma``.

    Returns the row-stochastic matrix and the achieved row entropies.
    """
    N = D.shape[0]
    off = ~np.eye(N, dtype=bool)
    # Distances to the other points only; shift by the nearest neighbour for stability.
    Doff = D[off].reshape(N, N - 1)
    Doff = Doff - Doff.min(axis=1, keepdims=True)

    lo = np.full(N, np.log(1e-12))
    hi = np.full(N, np.log(1e12))

    def rows_at(log_sigma):
        logits = -Doff / (2.0 * np.exp(2.0 * log_sigma))[:, None]
        logits -= logits.max(axis=1, keepdims=True)
        P = np.exp(logits)
        P /= P.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            H = -np.sum(np.where(P > 0, P * np.log(P), 0.0), axis=1)
        return P, H

    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        P, H = rows_at(mid)
        err = H - target
        if np.all(np.abs(err) < tol):
            break
        # entropy increases with the bandwidth
        too_high = err > 0
        hi = np.where(too_high, mid, hi)
        lo = np.where(too_high, lo, mid)
    else:
        raise ConvergenceError(
            "entropic affinity bisection did not converge", float(np.max(np.abs(err)))
        )
    full = np.zeros((N, N))
    full[off] = P.ravel()
    return full, H


def entropic_affinity(X, perplexity, tol=1e-6, max_iter=200, return_rows=False):
    r"""Symmetrized entropic affinity with perplexity ``xi``.

    Each row ``i`` of a Gaussian kernel (self excluded) gets its own bandwidth
    so that its Shannon entropy equals :math:`\log \xi`. The row-stochastic
    matrix ``P`` is then symmetrized as ``(P + P^T) / (2N)``, which has total
    mass one and a zero diagonal.

    When ``xi >= N - 1`` the target entropy is at or above the maximum
    ``log(N - 1)``; rows are then uniform over the other points.

    Parameters
    ----------
    X : array-like, shape (N, p)
    perplexity : float
        Must satisfy ``1 < perplexity < N``.
    tol : float
        Tolerance on each row's entropy.
    max_iter : int
        Bisection iterations.
    return_rows : bool
        Also return the row-stochastic matrix before symmetrization.

    Raises
    ------
    ParameterError
        If the perplexity is outside ``(1, N)``.
    ConvergenceError
        If some row does not reach the target entropy.
    """
    X = _check_data(X)
    N = X.shape[0]
    if not (1.0 < perplexity < N):
        raise ParameterError(f"perplexity must lie in (1, N={N}), got {perplexity}")
    target = np.log(perplexity)
    if perplexity >= N - 1:
        P = np.full((N, N), 1.0 / (N - 1))
        np.fill_diagonal(P, 0.0)
    else:
        P, _ = _row_entropy_search(pairwise_sqdist(X), target, tol, max_iter)
    C = (P + P.T) / (2.0 * N)
    graph = SimilarityGraph(C, _uniform(N), kind="entropic_affinity", perplexity=perplexity)
    if return_rows:
        return graph, P
    return graph


def student_kernel(Z):
    """Unnormalized Student-t kernel ``(1 + ||z_i - z_j||^2)^-1`` (diagonal kept)."""
    return 1.0 / (1.0 + pairwise_sqdist(Z))


def student_similarity(Z):
    """Scalar-normalized Student-t similarity, total mass one, diagonal kept."""
    Z = _check_data(Z, "Z")
    K = student_kernel(Z)
    return SimilarityGraph(K / K.sum(), _uniform(Z.shape[0]), kind="student")


def gram_similarity(Z):
    """Output inner-product similarity ``C_Z = Z Z^T`` (same as :func:`linear_gram`)."""
    return linear_gram(Z)


def input_similarity(X, kind, perplexity=30.0):
    """Dispatch on the input similarity name used in configurations."""
    kind = canonical_kind(kind)
    if kind == "gram":
        return linear_gram(X)
    if kind == "mds_gram":
        return mds_gram(pairwise_sqdist(_check_data(X)))
    if kind == "entropic_affinity":
        return entropic_affinity(X, perplexity)
    raise ContractViolation(f"{kind!r} is not an input similarity")


_ALIASES = {
    "gram": "gram",
    "linear": "gram",
    "mds": "mds_gram",
    "mds_gram": "mds_gram",
    "entropic": "entropic_affinity",
    "entropic_affinity": "entropic_affinity",
    "ea": "entropic_affinity",
    "sea": "entropic_affinity",
    "student": "student",
    "custom": "custom",
}


def canonical_kind(kind):
    try:
        return _ALIASES[str(kind).lower()]
    except KeyError:
        raise ContractViolation(f"unknown similarity kind {kind!r}") from None
