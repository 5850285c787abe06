"""Block coordinate descent for distributional reduction.

The fit alternates an embedding update (Adam steps on the prototype
positions ``Z`` for a fixed coupling) with a semi-relaxed GW solve for the
coupling ``T`` given ``Z``. Prototype masses are always ``h_Z = T^T 1_N``.
"""

from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import srgw
from .affinity import SimilarityGraph, canonical_kind, entropic_affinity, input_similarity, student_kernel
from .clustering import membership_matrix, spectral_clustering
from .errors import ConfigurationError, ContractViolation, DomainError
from .loss import get_loss

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class DistrConfig:
    """Hyperparameters of :func:`distr_fit`.

    ``cx_kind`` is one of ``gram``, ``mds_gram``, ``entropic_affinity``;
    ``cz_kind`` is ``gram`` or ``student``. ``tol`` is the relative change of
    the outer objective used to stop the block coordinate descent, while
    ``solver_tol`` controls each coupling solve. ``cx_scale`` multiplies the
    input similarity; with the KL loss it sets the balance between the
    attraction of ``T^T C T`` and the mass term ``q^T Cbar q``.
    """

    n: int = 10
    d: int = 2
    cx_kind: str = "entropic_affinity"
    cz_kind: str = "student"
    loss: str = "kl"
    perplexity: float = 30.0
    solver: str = "cg"
    epsilon: float = 1.0
    tol: float = 1e-7
    solver_tol: float = 1e-9
    solver_max_iter: Optional[int] = None
    max_outer: int = 50
    n_inner: int = 100
    lr: float = 0.01
    seed: int = 0
    mass_threshold: float = 1e-4
    update_coupling: bool = True
    cx_scale: float = 1.0

    def __post_init__(self):
        try:
            self.cx_kind = canonical_kind(self.cx_kind)
            self.cz_kind = canonical_kind(self.cz_kind)
            self.loss = get_loss(self.loss).name
        except ContractViolation as exc:
            raise ConfigurationError(str(exc)) from None

    def validate(self, N=None):
        if self.n < 1 or self.d < 1:
            raise ConfigurationError("n and d must be at least 1")
        if N is not None and self.n > N:
            raise ConfigurationError(f"n={self.n} exceeds the number of samples N={N}")
        if self.cx_kind not in ("gram", "mds_gram", "entropic_affinity"):
            raise ConfigurationError(f"{self.cx_kind!r} is not an input similarity")
        if self.cz_kind not in ("gram", "student"):
            raise ConfigurationError(f"{self.cz_kind!r} is not an output similarity")
        if self.loss == "kl":
            if self.cx_kind != "entropic_affinity":
                raise ConfigurationError(
                    f"KL loss needs a nonnegative input similarity, {self.cx_kind!r} may be negative")
            if self.cz_kind != "student":
                raise ConfigurationError("KL loss needs a positive output similarity (student)")
        if self.solver not in ("cg", "md"):
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if self.solver == "md" and self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive for mirror descent")
        if not self.cx_scale > 0:
            raise ConfigurationError("cx_scale must be positive")
        if self.n_inner < 0 or self.lr < 0 or self.max_outer < 0:
            raise ConfigurationError("n_inner, lr and max_outer must be nonnegative")

    def to_dict(self):
        return asdict(self)


@dataclass
class EmbeddingState:
    """Prototype positions together with the Adam moment accumulators."""

    Z: np.ndarray
    kernel_kind: str = "student"
    lr: float = 0.01
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    step: int = 0

    def __post_init__(self):
        self.Z = np.array(self.Z, dtype=float)
        if self.m is None:
            self.m = np.zeros_like(self.Z)
        if self.v is None:
            self.v = np.zeros_like(self.Z)


@dataclass
class DistrResult:
    Z: np.ndarray
    h_Z: np.ndarray
    T: np.ndarray
    objective_trace: List[float]
    effective_n: int
    kept_columns: List[int]
    Cz: np.ndarray
    config: DistrConfig
    n_outer: int = 0
    converged: bool = False
    solver_reports: list = field(default_factory=list, repr=False)


def output_similarity(kind, Z):
    """``C_Z(Z)`` as a :class:`SimilarityGraph` (Gram graphs keep ``Z`` as factor)."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    h = np.full(n, 1.0 / n)
    if kind == "gram":
        return SimilarityGraph(Z @ Z.T, h, low_rank=Z, kind="gram")
    if kind == "student":
        K = student_kernel(Z)
        return SimilarityGraph(K / K.sum(), h, kind="student")
    raise ConfigurationError(f"unknown output similarity {kind!r}")


def kernel_vjp(kernel_kind, Z, G, K=None):
    r"""Gradient of :math:`Z \mapsto \langle G, C_Z(Z) \rangle`.

    For ``gram`` this is ``(G + G^T) Z``. For the normalized Student kernel
    ``C = K / s`` with ``s = sum(K)``, the upstream gradient is first pulled
    back to ``K`` as ``H = G / s - <G, K> / s^2`` and then through
    ``dK_jl / dz_j = -2 K_jl^2 (z_j - z_l)``. A precomputed Student kernel
    may be passed as ``K``.
    """
    Z = np.asarray(Z, dtype=float)
    G = np.asarray(G, dtype=float)
    if kernel_kind == "gram":
        return (G + G.T) @ Z
    if kernel_kind == "student":
        if K is None:
            K = student_kernel(Z)
        s = K.sum()
        H = G / s - np.sum(G * K) / s**2
        W = (H + H.T) * K * K
        # sum_l W_jl (z_j - z_l) = z_j sum_l W_jl - (W Z)_j
        return -2.0 * (W.sum(axis=1)[:, None] * Z - W @ Z)
    raise ConfigurationError(f"unknown output similarity {kernel_kind!r}")


class _EmbeddingObjective:
    """Objective in ``Cbar`` for a fixed coupling, constants dropped.

    With ``M = T^T C T`` and ``q = T^T 1`` the cost reads
    ``sum(qq^T * f2(Cbar)) - sum(M * h2(Cbar))``.
    """

    def __init__(self, C, T, loss):
        self.loss = get_loss(loss)
        self.q = T.sum(axis=0)
        self.qq = np.outer(self.q, self.q)
        self.M = T.T @ C @ T

    def value(self, Cbar):
        self.loss.check_domain(b=Cbar)
        return float(np.sum(self.qq * self.loss.f2(Cbar)) - np.sum(self.M * self.loss.h2(Cbar)))

    def grad(self, Cbar):
        if self.loss.name == "l2":
            return 2.0 * (Cbar * self.qq - self.M)
        return self.qq - self.M / Cbar


def embedding_gradient(Cx, T, Z, kernel_kind, loss):
    """Value and gradient in ``Z`` of the objective for a fixed coupling ``T``.

    The value is :func:`~distr.srgw.objective_reduced` at ``T`` with
    ``Cbar = C_Z(Z)``, that is the full objective without its constant.
    """
    C = np.asarray(getattr(Cx, "C", Cx), dtype=float)
    obj = _EmbeddingObjective(C, np.asarray(T, dtype=float), loss)
    Cbar = output_similarity(kernel_kind, Z).C
    return obj.value(Cbar), kernel_vjp(kernel_kind, Z, obj.grad(Cbar))


def z_step(Cx, T, state, loss, n_inner=100, return_trace=False):
    """Run ``n_inner`` Adam steps on the prototypes for a fixed coupling.

    The returned state carries the best iterate visited (the starting point
    included), so the objective never increases across a call. The Adam
    moments continue from the last step taken.

    Returns
    -------
    state : EmbeddingState
    trace : list of float
        Objective (constant dropped) before each step and after the last one;
        only when ``return_trace`` is true.
    """
    C = np.asarray(getattr(Cx, "C", Cx), dtype=float)
    T = np.asarray(T, dtype=float)
    obj = _EmbeddingObjective(C, T, loss)
    kind = state.kernel_kind
    Z = state.Z.copy()
    m, v, step = state.m.copy(), state.v.copy(), state.step

    trace = []
    best_Z, best_val = Z.copy(), np.inf
    for it in range(n_inner + 1):
        if kind == "student":
            K = student_kernel(Z)
            Cbar = K / K.sum()
        else:
            K, Cbar = None, Z @ Z.T
        if obj.loss.name == "kl" and np.any(Cbar <= 0):
            raise DomainError("KL loss requires strictly positive output similarities")
        val = obj.value(Cbar)
        trace.append(val)
        if val < best_val:
            best_Z, best_val = Z.copy(), val
        if it == n_inner:
            break
        gZ = kernel_vjp(kind, Z, obj.grad(Cbar), K)
        step += 1
        m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * gZ
        v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * gZ * gZ
        m_hat = m / (1 - ADAM_BETA1**step)
        v_hat = v / (1 - ADAM_BETA2**step)
        Z = Z - state.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        if not np.all(np.isfinite(Z)):
            break

    new_state = EmbeddingState(best_Z, kind, state.lr, m, v, step)
    if return_trace:
        return new_state, trace
    return new_state


def prune_report(T, mass_threshold=1e-4):
    """Count prototypes whose mass ``sum_i T_ik`` is at least ``mass_threshold``."""
    mass = np.asarray(T, dtype=float).sum(axis=0)
    kept = [int(k) for k in np.flatnonzero(mass >= mass_threshold)]
    return len(kept), kept


def initial_coupling(Cx, X, n, config, h):
    """Spectral-clustering memberships of the input graph, rows scaled by ``h``.

    Input graphs with negative entries (Gram, MDS) are clustered through an
    entropic affinity of ``X`` instead.
    """
    N = Cx.n
    C = Cx.C
    if n == N:
        labels = np.arange(N)
    else:
        if np.any(C < 0):
            C = entropic_affinity(X, min(config.perplexity, max(1.5, (N - 1) / 3.0))).C
        labels = spectral_clustering(C, n, seed=config.seed).labels
    T = membership_matrix(labels, n, h)
    if config.solver == "md":
        T = srgw.smooth_coupling(T)
    return T


def distr_fit(X, config=None, h=None, Cx=None, T_init=None, Z_init=None, **overrides):
    """Fit prototypes, their masses and the coupling to the data ``X``.

    Parameters
    ----------
    X : array-like, shape (N, p)
    config : DistrConfig, optional
        Keyword ``overrides`` are applied on top of it.
    h : array-like, shape (N,), optional
        Input sample weights, uniform by default.
    Cx : SimilarityGraph, optional
        Precomputed input similarity (``config.cx_kind`` is then ignored).
    T_init, Z_init : ndarray, optional
        Override the spectral / Gaussian initializations.

    Returns
    -------
    DistrResult
    """
    if config is None:
        config = DistrConfig(**overrides)
    elif overrides:
        config = DistrConfig(**{**config.to_dict(), **overrides})
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    config.validate(N)
    loss = get_loss(config.loss)

    if Cx is None:
        Cx = input_similarity(X, config.cx_kind, config.perplexity)
    if h is not None:
        h = np.asarray(h, dtype=float)
        Cx = SimilarityGraph(Cx.C, h, low_rank=Cx.low_rank, kind=Cx.kind)
    if config.cx_scale != 1.0:
        factor = None if Cx.low_rank is None else Cx.low_rank * np.sqrt(config.cx_scale)
        Cx = SimilarityGraph(Cx.C * config.cx_scale, Cx.h, low_rank=factor, kind="custom")
    h = Cx.h
    loss.check_domain(a=Cx.C)

    rng = np.random.default_rng(config.seed)
    Z0 = rng.standard_normal((config.n, config.d)) if Z_init is None else np.asarray(Z_init, float)
    if Z0.shape != (config.n, config.d):
        raise ContractViolation("Z_init has the wrong shape")
    state = EmbeddingState(Z0, config.cz_kind, config.lr)

    if T_init is not None:
        T = np.asarray(T_init, dtype=float)
    elif not config.update_coupling:
        if config.n != N:
            raise ConfigurationError("a fixed coupling requires n == N")
        T = np.diag(h)
    else:
        T = initial_coupling(Cx, X, config.n, config, h)

    constant = srgw.objective_constant(Cx, loss, h)

    def full_objective(T, Cz):
        return srgw.SrgwProblem(Cx, Cz, loss, h=h).objective(T) + constant

    trace = [full_objective(T, output_similarity(config.cz_kind, state.Z))]
    reports = []
    converged = False
    outer = 0
    for outer in range(1, config.max_outer + 1):
        state = z_step(Cx, T, state, loss, config.n_inner)
        Cz = output_similarity(config.cz_kind, state.Z)
        if config.update_coupling:
            problem = srgw.SrgwProblem(Cx, Cz, loss, h=h)
            T, report = srgw.solve(Cx, Cz, loss, T, solver=config.solver, epsilon=config.epsilon,
                                   tol=config.solver_tol, max_iter=config.solver_max_iter,
                                   problem=problem)
            reports.append(report)
            value = report.final_objective + constant
        else:
            value = full_objective(T, Cz)
        previous = trace[-1]
        trace.append(value)
        if abs(previous - value) <= config.tol * max(abs(value), abs(previous), 1e-300):
            converged = True
            break

    Cz = output_similarity(config.cz_kind, state.Z).C
    effective_n, kept = prune_report(T, config.mass_threshold)
    return DistrResult(
        Z=state.Z, h_Z=T.sum(axis=0), T=T, objective_trace=trace, effective_n=effective_n,
        kept_columns=kept, Cz=Cz, config=config, n_outer=outer, converged=converged,
        solver_reports=reports,
    )
