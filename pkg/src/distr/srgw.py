r"""Semi-relaxed Gromov-Wasserstein solvers.

For a decomposable loss the semi-relaxed objective over
:math:`\mathcal{U}_n(h) = \{T \ge 0, T 1_n = h\}` equals, up to the constant
:math:`\sum_{ij} f_1(C_{ij}) h_i h_j`,

.. math::

    F(T) = q^\top f_2(\bar C) q - \langle h_1(C) T h_2(\bar C)^\top, T\rangle,
    \qquad q = T^\top 1_N,

a homogeneous quadratic in ``T``. Both solvers below (conditional gradient
with exact line search, and KL mirror descent) work on ``F``.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ContractViolation, DegenerateGraphError, ParameterError
from .loss import get_loss

# Relative slack used when checking that an iterate does not increase F.
DESCENT_SLACK = 1e-12


@dataclass
class SolverReport:
    final_objective: float
    objective_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    termination_reason: str = ""


def _matrix(G):
    return np.asarray(getattr(G, "C", G), dtype=float)


def _factor(G):
    return getattr(G, "low_rank", None)


def _is_symmetric(M):
    return M.shape[0] == M.shape[1] and np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max(initial=0)))


class SrgwProblem:
    """Cached loss transforms for a fixed pair ``(C, Cbar)``.

    Parameters
    ----------
    Cx : SimilarityGraph or ndarray, shape (N, N)
        Source structure. Its weights ``h`` are used unless ``h`` is given.
    Cz : SimilarityGraph or ndarray, shape (n, n)
        Target structure.
    loss : str or DecomposableLoss
    h : ndarray, shape (N,), optional
    path : {"auto", "dense", "lowrank"}
        ``"auto"`` picks the factored path when both graphs carry an exact
        low-rank factor.
    """

    def __init__(self, Cx, Cz, loss="l2", h=None, path="auto"):
        self.loss = get_loss(loss)
        C = _matrix(Cx)
        Cbar = _matrix(Cz)
        if C.ndim != 2 or C.shape[0] != C.shape[1] or Cbar.ndim != 2 or Cbar.shape[0] != Cbar.shape[1]:
            raise ContractViolation("similarity matrices must be square")
        if h is None:
            h = getattr(Cx, "h", None)
        if h is None:
            h = np.full(C.shape[0], 1.0 / C.shape[0])
        self.h = np.asarray(h, dtype=float)
        if self.h.shape != (C.shape[0],):
            raise ContractViolation("source weights do not match C")
        self.loss.check_domain(C, Cbar)
        self.C = C
        self.Cbar = Cbar
        self.N, self.n = C.shape[0], Cbar.shape[0]

        A, B = _factor(Cx), _factor(Cz)
        if path == "auto":
            path = "lowrank" if A is not None and B is not None else "dense"
        if path not in ("dense", "lowrank"):
            raise ContractViolation(f"unknown path {path!r}")
        if path == "lowrank" and (A is None or B is None):
            raise ContractViolation("the low-rank path needs factors on both graphs")
        self.path = path

        self.f2 = self.loss.f2(Cbar)
        self.h2 = self.loss.h2(Cbar)
        if path == "lowrank":
            self.A = np.asarray(A, dtype=float)
            self.B = np.asarray(B, dtype=float)
            self.symmetric = True
        else:
            self.h1 = self.loss.h1(C)
            self.symmetric = _is_symmetric(C) and _is_symmetric(Cbar)

    # -- building blocks -------------------------------------------------
    def F1(self, M):
        """``1_N (f2(Cbar) M^T 1_N)^T``."""
        return np.broadcast_to(self.f2 @ M.sum(axis=0), M.shape)

    def F2(self, M):
        """``h1(C) M h2(Cbar)^T``, factored when possible."""
        if self.path == "lowrank":
            AtM = self.A.T @ M
            if self.loss.name == "l2":
                # h2(Cbar) = 2 B B^T
                return 2.0 * (self.A @ ((AtM @ self.B) @ self.B.T))
            return self.A @ (AtM @ self.h2.T)
        return self.h1 @ M @ self.h2.T

    def bilinear(self, M, P):
        """``<F1(M) - F2(M), P>`` so that ``F(T) = bilinear(T, T)``."""
        qM, qP = M.sum(axis=0), P.sum(axis=0)
        first = qM @ self.f2.T @ qP
        if self.path == "lowrank" and self.loss.name == "l2":
            second = 2.0 * np.sum((self.A.T @ M @ self.B) * (self.A.T @ P @ self.B))
        else:
            second = np.sum(self.F2(M) * P)
        return float(first - second)

    # -- objective and gradient -----------------------------------------
    def objective(self, T):
        return self.bilinear(T, T)

    def gradient(self, T):
        if self.symmetric:
            return 2.0 * (self.F1(T) - self.F2(T))
        q = T.sum(axis=0)
        ones = np.ones((self.N, 1))
        first = ones * (self.f2 @ q)[None, :] + ones * (self.f2.T @ q)[None, :]
        second = self.h1 @ T @ self.h2.T + self.h1.T @ T @ self.h2
        return first - second

    def constant(self):
        r""":math:`\sum_{ij} f_1(C_{ij}) h_i h_j`, the part of the cost independent of ``T``."""
        if self.path == "lowrank" and self.loss.name == "l2":
            AhA = self.A.T @ (self.h[:, None] * self.A)
            return float(np.sum(AhA * AhA))
        return float(self.h @ self.loss.f1(self.C) @ self.h)

    def full_objective(self, T):
        return self.objective(T) + self.constant()

    def line_search_coefficients(self, T, D):
        """Coefficients of ``F(T + g D) = a g^2 + b g + F(T)``."""
        a = self.bilinear(D, D)
        b = self.bilinear(T, D) + self.bilinear(D, T)
        return a, b


def _check_coupling(T, h, atol=1e-9):
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != h.shape[0]:
        raise ContractViolation("coupling shape does not match the source weights")
    if np.any(T < 0):
        raise ContractViolation("coupling has negative entries")
    if np.max(np.abs(T.sum(axis=1) - h)) > atol:
        raise ContractViolation("coupling rows do not sum to the source weights")
    return T


def objective_reduced(Cx, Cz, T, loss="l2", path="auto"):
    """Reduced objective ``F(T)`` (the constant ``sum f1(C) h h`` is dropped)."""
    T = np.asarray(T, dtype=float)
    return SrgwProblem(Cx, Cz, loss, h=T.sum(axis=1), path=path).objective(T)


def gradient_reduced(Cx, Cz, T, loss="l2", path="auto"):
    """Gradient of :func:`objective_reduced` with respect to ``T``."""
    T = np.asarray(T, dtype=float)
    return SrgwProblem(Cx, Cz, loss, h=T.sum(axis=1), path=path).gradient(T)


def objective_constant(Cx, loss="l2", h=None):
    C = _matrix(Cx)
    if h is None:
        h = getattr(Cx, "h", np.full(C.shape[0], 1.0 / C.shape[0]))
    return float(h @ get_loss(loss).f1(C) @ h)


def linear_oracle(G, h):
    """Minimize ``<X, G>`` over ``{X >= 0, X 1 = h}``.

    Each row puts all its mass on its smallest gradient entry, ties going to
    the smallest column index.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    X = np.zeros_like(G)
    X[np.arange(G.shape[0]), np.argmin(G, axis=1)] = h
    return X


def optimal_step(a, b):
    """Minimizer over ``[0, 1]`` of ``a g^2 + b g``."""
    if a > 0:
        return min(max(-b / (2.0 * a), 0.0), 1.0)
    if a < 0:
        return 1.0 if a + b < 0 else 0.0
    return 1.0 if b < 0 else 0.0


def exact_line_search(Cx, Cz, T, D, loss="l2", problem=None):
    """Exact step along a feasible direction ``D`` (with ``D 1 = 0``).

    Returns
    -------
    gamma : float
        Optimal step in ``[0, 1]``.
    a, b : float
        Quadratic and linear coefficients of ``g -> F(T + g D)``.
    """
    T = np.asarray(T, dtype=float)
    D = np.asarray(D, dtype=float)
    if problem is None:
        problem = SrgwProblem(Cx, Cz, loss, h=T.sum(axis=1))
    a, b = problem.line_search_coefficients(T, D)
    return optimal_step(a, b), a, b


def _relative_change(old, new):
    delta = abs(old - new)
    if delta == 0.0:
        return 0.0
    return delta / max(abs(new), abs(old))


def cg_solve(Cx, Cz, loss="l2", T0=None, tol=1e-9, max_iter=2000, problem=None):
    """Conditional gradient (Frank-Wolfe) solver with exact line search.

    Parameters
    ----------
    Cx, Cz : SimilarityGraph or ndarray
    loss : str or DecomposableLoss
    T0 : ndarray, shape (N, n)
        Feasible initial coupling. Defaults to the product ``h 1_n^T / n``.
    tol : float
        Stop when the relative decrease of the objective falls below ``tol``.
    max_iter : int
    problem : SrgwProblem, optional
        Reuse cached transforms.

    Returns
    -------
    T : ndarray, shape (N, n)
    report : SolverReport
        ``objective_trace`` holds the reduced objective ``F``.
    """
    if problem is None:
        problem = SrgwProblem(Cx, Cz, loss, h=None if T0 is None else np.asarray(T0).sum(1))
    h = problem.h
    if T0 is None:
        T0 = np.outer(h, np.full(problem.n, 1.0 / problem.n))
    T = _check_coupling(T0, h).copy()

    if problem.n == 1:
        F = problem.objective(T)
        return T, SolverReport(F, [F], 0, True, "single_target_node")

    G = problem.gradient(T)
    F = 0.5 * float(np.sum(G * T))
    trace = [F]
    reason, converged, it = "max_iter", False, 0
    for it in range(1, max_iter + 1):
        X = linear_oracle(G, h)
        D = X - T
        if -float(np.sum(G * D)) <= 0.0:
            reason, converged = "stationary", True
            it -= 1
            break
        a, b = problem.line_search_coefficients(T, D)
        gamma = optimal_step(a, b)
        if gamma == 0.0:
            reason, converged = "no_descent_step", True
            it -= 1
            break
        T_new = T + gamma * D
        np.maximum(T_new, 0.0, out=T_new)
        G_new = problem.gradient(T_new)
        F_new = 0.5 * float(np.sum(G_new * T_new))
        if F_new > F + DESCENT_SLACK * abs(F):
            reason, converged = "numerical_stall", True
            it -= 1
            break
        T, G = T_new, G_new
        trace.append(F_new)
        change = _relative_change(F, F_new)
        F = F_new
        if change < tol:
            reason, converged = "relative_tol", True
            break
    return T, SolverReport(F, trace, it, converged, reason)


def md_solve(Cx, Cz, loss="l2", T0=None, epsilon=1.0, tol=1e-9, max_iter=5000, problem=None,
             max_backtrack=20):
    r"""Mirror descent in the KL geometry.

    Each step computes :math:`K = T \odot \exp(-\nabla F(T) / \varepsilon)` and
    rescales its rows to ``h``, the KL projection onto the row constraints.
    If a step would increase ``F``, ``epsilon`` is doubled for that step
    (up to ``max_backtrack`` times); a step that cannot descend ends the run.

    Parameters
    ----------
    T0 : ndarray, shape (N, n)
        Strictly positive feasible coupling (product coupling by default).
    epsilon : float
        Inverse step size, must be positive.
    """
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    if problem is None:
        problem = SrgwProblem(Cx, Cz, loss, h=None if T0 is None else np.asarray(T0).sum(1))
    h = problem.h
    if T0 is None:
        T0 = np.outer(h, np.full(problem.n, 1.0 / problem.n))
    T = _check_coupling(T0, h).copy()
    if np.any(T[h > 0] <= 0):
        raise ContractViolation("mirror descent needs a strictly positive initial coupling")

    def project(logK):
        logK = logK - logK.max(axis=1, keepdims=True)
        K = np.exp(logK)
        return K * (h / K.sum(axis=1))[:, None]

    F = problem.objective(T)
    trace = [F]
    reason, converged, it = "max_iter", False, 0
    with np.errstate(divide="ignore"):
        for it in range(1, max_iter + 1):
            G = problem.gradient(T)
            logT = np.log(T)
            eps = epsilon
            for _ in range(max_backtrack + 1):
                T_new = project(logT - G / eps)
                F_new = problem.objective(T_new)
                if F_new <= F:
                    break
                eps *= 2.0
            else:
                reason, converged = "no_descent_step", True
                it -= 1
                break
            change = _relative_change(F, F_new)
            T, F = T_new, F_new
            trace.append(F)
            if change < tol:
                reason, converged = "relative_tol", True
                break
    return T, SolverReport(F, trace, it, converged, reason)


def barycenter_step(Cx, T):
    r"""Closed-form optimal target structure for a fixed coupling.

    .. math:: \bar C_{kl} = \frac{T_{:,k}^\top C T_{:,l}}{q_k q_l}, \quad q = T^\top 1_N,

    with zero rows and columns for null columns of ``T``. This solves the
    first-order condition :math:`\bar C \odot q q^\top = T^\top C T` and is
    used for both the square and the KL loss.
    """
    C = _matrix(Cx)
    T = np.asarray(T, dtype=float)
    q = T.sum(axis=0)
    M = T.T @ C @ T
    qq = np.outer(q, q)
    return np.divide(M, qq, out=np.zeros_like(M), where=qq > 0)


def solve(Cx, Cz, loss="l2", T0=None, solver="cg", epsilon=1.0, tol=1e-9, max_iter=None,
          problem=None):
    """Dispatch to :func:`cg_solve` or :func:`md_solve`."""
    if solver == "cg":
        return cg_solve(Cx, Cz, loss, T0, tol=tol, max_iter=max_iter or 2000, problem=problem)
    if solver == "md":
        return md_solve(Cx, Cz, loss, T0, epsilon=epsilon, tol=tol, max_iter=max_iter or 5000,
                        problem=problem)
    raise ParameterError(f"unknown solver {solver!r}")


def smooth_coupling(T, weight=0.05):
    """Mix a coupling with the product coupling so every entry is positive."""
    h = T.sum(axis=1)
    n = T.shape[1]
    return (1.0 - weight) * T + weight * np.outer(h, np.full(n, 1.0 / n))


def srgw_barycenter(Cx, n, T0=None, n_restarts=1, tol=1e-9, max_iter=100, seed=0):
    r"""Square-loss srGW barycenter: alternate coupling updates and the closed form.

    Minimizes :math:`\min_{\bar C} \min_T E_{L_2}(C, \bar C, T)` by block
    coordinate descent, starting from ``T0`` and from ``n_restarts - 1``
    random couplings; the best run is returned.

    Returns
    -------
    Cbar : ndarray, shape (n, n)
    T : ndarray, shape (N, n)
    value : float
        Full objective at the returned pair.
    """
    from .loss import L2

    C = _matrix(Cx)
    N = C.shape[0]
    h = getattr(Cx, "h", None)
    h = np.full(N, 1.0 / N) if h is None else np.asarray(h, dtype=float)
    rng = np.random.default_rng(seed)
    starts = []
    if T0 is not None:
        starts.append(np.asarray(T0, dtype=float))
    while len(starts) < max(1, n_restarts):
        R = rng.random((N, n))
        starts.append(R * (h / R.sum(axis=1))[:, None])

    best = None
    for T in starts:
        value = np.inf
        for _ in range(max_iter):
            Cbar = barycenter_step(C, T)
            T, _ = cg_solve(C, Cbar, L2, T, tol=tol, problem=SrgwProblem(C, Cbar, L2, h=h))
            Cbar = barycenter_step(C, T)
            new = SrgwProblem(C, Cbar, L2, h=h).full_objective(T)
            if value - new <= tol * max(abs(new), 1e-300):
                value = min(value, new)
                break
            value = new
        if best is None or value < best[2]:
            best = (Cbar, T, value)
    return best


def srgw_divergence(Cx, Cz, loss="l2", solver="cg", epsilon=1.0, tol=1e-9, max_iter=None,
                    seed=0, max_label_permutations=24):
    r"""Semi-relaxed GW divergence :math:`\min_{T \in \mathcal U_n(h)} E_L(C, \bar C, T)`.

    The solver is started from spectral-clustering memberships of ``Cx`` into
    ``n`` groups. Because the groups carry no natural order with respect to
    the fixed target nodes, several label-to-node assignments are tried (all
    of them when ``n! <= max_label_permutations``), together with the
    product coupling; the best local solution is kept.

    Returns
    -------
    value : float
        Full objective (constant term included).
    T : ndarray, shape (N, n)
    """
    from .clustering import membership_matrix, spectral_clustering

    problem = SrgwProblem(Cx, Cz, loss)
    h, N, n = problem.h, problem.N, problem.n
    starts = [np.outer(h, np.full(n, 1.0 / n))]
    try:
        k = min(n, N)
        labels = spectral_clustering(problem.C, k, seed=seed).labels
    except (ContractViolation, DegenerateGraphError):
        labels = None
    if labels is not None:
        perms = itertools.permutations(range(n), k)
        if math.perm(n, k) > max_label_permutations:
            rng = np.random.default_rng(seed)
            perms = [rng.permutation(n)[:k] for _ in range(max_label_permutations)]
        for perm in perms:
            starts.append(membership_matrix(np.asarray(perm)[labels], n, h))

    best_T, best_F = None, np.inf
    for T0 in starts:
        if solver == "md":
            T0 = smooth_coupling(T0)
        T, report = solve(problem.C, problem.Cbar, problem.loss, T0, solver=solver,
                          epsilon=epsilon, tol=tol, max_iter=max_iter, problem=problem)
        if report.final_objective < best_F:
            best_T, best_F = T, report.final_objective
    return best_F + problem.constant(), best_T
