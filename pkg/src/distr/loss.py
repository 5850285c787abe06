"""Decomposable inner losses ``L(a, b) = f1(a) + f2(b) - h1(a) h2(b)``.

Only two losses are needed: the square loss and the generalized
Kullback-Leibler divergence. For both, the Gromov-Wasserstein cost
:math:`\\sum_{ijkl} L(C_{ij}, \\bar C_{kl}) T_{ik} T_{jl}` can be evaluated
without the quadruple sum; :func:`gw_objective_bruteforce` keeps the naive
loop as a reference.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation, DomainError

# Floor applied inside log(b) for the KL loss.
KL_FLOOR = 1e-30


def _xlogx_minus_x(a):
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0) - a
    return out


@dataclass(frozen=True)
class DecomposableLoss:
    name: str
    f1: Callable
    f2: Callable
    h1: Callable
    h2: Callable

    def check_domain(self, a=None, b=None):
        """Raise :class:`DomainError` if entries fall outside the loss domain."""
        if self.name != "kl":
            return
        if a is not None and np.any(np.asarray(a) < 0):
            raise DomainError("KL loss requires nonnegative input similarities")
        if b is not None and np.any(np.asarray(b) <= 0):
            raise DomainError("KL loss requires strictly positive target similarities")

    def __call__(self, a, b):
        return loss_eval(self, a, b)


L2 = DecomposableLoss(
    "l2",
    f1=lambda a: np.square(a),
    f2=lambda b: np.square(b),
    h1=lambda a: np.asarray(a, dtype=float),
    h2=lambda b: 2.0 * np.asarray(b, dtype=float),
)

KL = DecomposableLoss(
    "kl",
    f1=_xlogx_minus_x,
    f2=lambda b: np.asarray(b, dtype=float),
    h1=lambda a: np.asarray(a, dtype=float),
    h2=lambda b: np.log(np.maximum(b, KL_FLOOR)),
)

_LOSSES = {"l2": L2, "square": L2, "square_loss": L2, "kl": KL, "kl_loss": KL}


def get_loss(loss):
    """Return a :class:`DecomposableLoss` from an instance or a name."""
    if isinstance(loss, DecomposableLoss):
        return loss
    try:
        return _LOSSES[str(loss).lower()]
    except KeyError:
        raise ContractViolation(f"unknown loss {loss!r}") from None


def loss_eval(loss, a, b):
    """Evaluate the inner loss elementwise through its decomposition."""
    loss = get_loss(loss)
    loss.check_domain(a, b)
    return loss.f1(a) + loss.f2(b) - loss.h1(a) * loss.h2(b)


def gw_objective_bruteforce(Cx, Cz, T, loss):
    """Naive quadruple sum ``sum_ijkl L(C_ij, Cbar_kl) T_ik T_jl``.

    Meant for small problems (``N * n`` up to about 1000). ``Cx`` and ``Cz``
    may be :class:`~distr.affinity.SimilarityGraph` objects or plain arrays.
    """
    C = np.asarray(getattr(Cx, "C", Cx), dtype=float)
    Cbar = np.asarray(getattr(Cz, "C", Cz), dtype=float)
    T = np.asarray(T, dtype=float)
    loss = get_loss(loss)
    N, n = T.shape
    if C.shape != (N, N) or Cbar.shape != (n, n):
        raise ContractViolation("shapes of C, Cbar and T are inconsistent")
    loss.check_domain(C, Cbar)
    total = 0.0
    for i in range(N):
        for j in range(N):
            for k in range(n):
                if T[i, k] == 0.0:
                    continue
                for l in range(n):
                    total += float(loss_eval(loss, C[i, j], Cbar[k, l])) * T[i, k] * T[j, l]
    return total
