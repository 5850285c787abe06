"""Clustering and embedding scores computed from a coupling and prototypes."""

from typing import NamedTuple

import numpy as np

from .errors import ContractViolation, DegenerateGraphError


class LabeledEvaluation(NamedTuple):
    homogeneity: float
    silhouette: float
    combined: float
    prototype_labels: np.ndarray


def _labels(y, N=None):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ContractViolation("labels must be a 1-D vector")
    if N is not None and y.shape[0] != N:
        raise ContractViolation(f"expected {N} labels, got {y.shape[0]}")
    _, codes = np.unique(y, return_inverse=True)
    return codes.ravel()


def prototype_labels(T, y):
    """Majority class of the mass each prototype receives.

    Column ``k`` gets the class ``c`` maximizing ``sum_i T_ik 1[y_i = c]``,
    ties going to the smallest class. Classes are the sorted unique values
    of ``y``; the returned labels are values of ``y``. Zero-mass columns
    are labeled ``-1``.
    """
    T = np.asarray(T, dtype=float)
    y = np.asarray(y)
    classes, codes = np.unique(y, return_inverse=True)
    if codes.shape[0] != T.shape[0]:
        raise ContractViolation("labels and coupling rows differ in length")
    mass = np.zeros((len(classes), T.shape[1]))
    np.add.at(mass, codes.ravel(), T)
    out = classes[np.argmax(mass, axis=0)].astype(int)
    out[T.sum(axis=0) <= 0] = -1
    return out


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def homogeneity_from_labels(y_true, y_pred):
    """``1 - H(Y|Yhat) / H(Y)``, equal to 1 when ``H(Y) = 0``."""
    a = _labels(y_true)
    b = _labels(y_pred, a.shape[0])
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    h_y = _entropy(joint.sum(axis=1))
    if h_y == 0.0:
        return 1.0
    n_tot = joint.sum()
    cols = joint.sum(axis=0)
    h_cond = sum(c / n_tot * _entropy(joint[:, j]) for j, c in enumerate(cols) if c > 0)
    return max(0.0, 1.0 - h_cond / h_y)


def homogeneity(T, y):
    """Homogeneity of the hard assignment ``argmax_k T_ik`` (ties to the smallest k)."""
    T = np.asarray(T, dtype=float)
    if np.asarray(y).shape[0] != T.shape[0]:
        raise ContractViolation("labels and coupling rows differ in length")
    return homogeneity_from_labels(y, np.argmax(T, axis=1))


def weighted_silhouette(Z, labels, w=None, denominator="weighted"):
    r"""Mass-weighted silhouette of labeled prototypes.

    For prototype ``i`` the intra-class distance :math:`\tilde a_i` is the
    ``w``-weighted mean distance to the other prototypes of its class and
    :math:`\tilde b_i` the smallest ``w``-weighted mean distance to another
    class. The score is :math:`\sum_i w_i (\tilde b_i - \tilde a_i) / m_i`.

    Parameters
    ----------
    Z : array-like, shape (n, d)
    labels : array-like, shape (n,)
        Prototype labels; ``-1`` marks unlabeled prototypes, which are ignored
        together with zero-mass ones.
    w : array-like, shape (n,), optional
        Prototype masses, renormalized over the kept prototypes. Uniform by
        default, in which case the score is the classical silhouette.
    denominator : {"weighted", "unweighted"}
        ``m_i = max(a~_i, b~_i)`` or the literal variant ``max(a_i, b_i)``
        built from unweighted means.

    Raises
    ------
    DegenerateGraphError
        If the kept prototypes all share one label.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    labels = np.asarray(labels)
    n = Z.shape[0]
    if labels.shape != (n,):
        raise ContractViolation("one label per prototype is required")
    w = np.full(n, 1.0 / n) if w is None else np.asarray(w, dtype=float)
    if w.shape != (n,) or np.any(w < 0):
        raise ContractViolation("weights must be a nonnegative vector of length n")
    if denominator not in ("weighted", "unweighted"):
        raise ContractViolation(f"unknown denominator {denominator!r}")

    keep = (w > 0) & (labels != -1)
    Z, labels, w = Z[keep], labels[keep], w[keep]
    if w.size == 0:
        raise ContractViolation("no labeled prototype carries mass")
    w = w / w.sum()
    classes, codes = np.unique(labels, return_inverse=True)
    codes = codes.ravel()
    if len(classes) < 2:
        raise DegenerateGraphError("silhouette is undefined when all prototypes share one label")

    D = np.sqrt(np.maximum(np.sum((Z[:, None, :] - Z[None, :, :]) ** 2, axis=-1), 0.0))
    m = Z.shape[0]
    onehot = np.zeros((m, len(classes)))
    onehot[np.arange(m), codes] = 1.0
    not_self = 1.0 - np.eye(m)

    def means(weights):
        # per (point, class) mean distance, self excluded
        num = (D * weights[None, :] * not_self) @ onehot
        den = (weights[None, :] * not_self) @ onehot
        with np.errstate(invalid="ignore", divide="ignore"):
            return num / den

    def a_b(weights):
        M = means(weights)
        a = M[np.arange(m), codes]
        other = M.copy()
        other[np.arange(m), codes] = np.inf
        return a, np.min(other, axis=1)

    a_w, b_w = a_b(w)
    if denominator == "weighted":
        denom = np.maximum(a_w, b_w)
    else:
        a_u, b_u = a_b(np.ones(m))
        denom = np.maximum(a_u, b_u)
    singleton = np.bincount(codes)[codes] == 1
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b_w - a_w) / denom, 0.0)
    s[singleton] = 0.0
    return float(np.sum(w * s))


def combined_score(S, H):
    """``((S + 1) / 2 + H) / 2``, mapping silhouette and homogeneity to [0, 1]."""
    if not -1.0 <= S <= 1.0:
        raise ContractViolation(f"silhouette must lie in [-1, 1], got {S}")
    if not 0.0 <= H <= 1.0:
        raise ContractViolation(f"homogeneity must lie in [0, 1], got {H}")
    return 0.5 * ((S + 1.0) / 2.0 + H)


def evaluate(Z, T, y, denominator="weighted"):
    """All three scores for prototypes ``Z`` coupled to labeled samples by ``T``."""
    T = np.asarray(T, dtype=float)
    labels = prototype_labels(T, y)
    H = homogeneity(T, y)
    S = weighted_silhouette(Z, labels, T.sum(axis=0), denominator=denominator)
    return LabeledEvaluation(H, S, combined_score(S, H), labels)
