import numpy as np
import pytest
from hypothesis import given, strategies as st

from distr.errors import ContractViolation, DegenerateGraphError
from distr.metrics import (
    combined_score, evaluate, homogeneity, homogeneity_from_labels, prototype_labels, weighted_silhouette,
)

# 0.75 * H(1/3) / log 2 with H(1/3) = -(1/3) log(1/3) - (2/3) log(2/3)
HAND_HOMOGENEITY = 1 - 0.75 * (np.log(3) - 2 / 3 * np.log(2)) / np.log(2)


def classical_silhouette(Z, labels):
    D = np.linalg.norm(Z[:, None] - Z[None], axis=-1)
    s = []
    for i in range(len(Z)):
        same = (labels == labels[i]) & (np.arange(len(Z)) != i)
        if not same.any():
            s.append(0.0)
            continue
        a = D[i, same].mean()
        b = min(D[i, labels == c].mean() for c in set(labels) if c != labels[i])
        s.append((b - a) / max(a, b))
    return float(np.mean(s))


def test_prototype_labels():
    h = np.full(4, 0.25)
    np.testing.assert_array_equal(prototype_labels(np.diag(h), [3, 1, 1, 0]), [3, 1, 1, 0])
    T = np.array([[0.25, 0.0], [0.25, 0.0], [0.0, 0.0], [0.0, 0.5]])
    np.testing.assert_array_equal(prototype_labels(T, [1, 3, 2, 2]), [1, 2])
    T = np.zeros((10, 2))
    T[:, 0] = 0.1
    np.testing.assert_array_equal(prototype_labels(T, [0] * 7 + [1] * 3), [0, -1])


def test_homogeneity_examples():
    assert homogeneity_from_labels([0, 0, 1, 1], [0, 0, 1, 2]) == 1.0
    assert homogeneity_from_labels([0, 0, 1, 1], [0, 0, 0, 0]) == 0.0
    assert homogeneity_from_labels([0, 0, 0], [0, 1, 2]) == 1.0
    value = homogeneity_from_labels([0, 0, 1, 1], [0, 1, 1, 1])
    assert abs(value - HAND_HOMOGENEITY) < 1e-15
    assert abs(value - 0.311278) < 1e-6
    T = np.array([[1, 0], [0, 1], [0, 1], [0, 1]]) / 4.0
    assert homogeneity(T, [0, 0, 1, 1]) == value


def test_homogeneity_against_sklearn():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.integers(0, 4, 30), rng.integers(0, 5, 30)
        assert abs(homogeneity_from_labels(a, b) - sk.homogeneity_score(a, b)) < 1e-12


def test_silhouette_examples():
    assert weighted_silhouette(np.array([[0.0], [1.0]]), np.array([0, 1])) == 0.0
    Z = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]])
    assert weighted_silhouette(Z, np.array([0, 0, 1, 1]), np.array([0.1, 0.2, 0.3, 0.4])) > 0.95
    with pytest.raises(DegenerateGraphError):
        weighted_silhouette(Z, np.zeros(4, dtype=int))


def test_silhouette_uniform_weights_is_classical():
    rng = np.random.default_rng(1)
    for _ in range(20):
        Z = rng.standard_normal((12, 2))
        labels = rng.integers(0, 3, 12)
        if len(set(labels)) < 2:
            continue
        expected = classical_silhouette(Z, labels)
        assert abs(weighted_silhouette(Z, labels) - expected) < 1e-12
        assert abs(weighted_silhouette(Z, labels, denominator="unweighted") - expected) < 1e-12


def test_silhouette_against_sklearn():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(2)
    Z = rng.standard_normal((15, 3))
    labels = np.repeat([0, 1, 2], 5)
    assert abs(weighted_silhouette(Z, labels) - sk.silhouette_score(Z, labels)) < 1e-12


def test_silhouette_ignores_dead_and_unlabeled():
    Z = np.array([[0.0], [0.1], [10.0], [10.1], [5.0], [3.0]])
    labels = np.array([0, 0, 1, 1, -1, 0])
    w = np.array([0.25, 0.25, 0.25, 0.25, 0.3, 0.0])
    assert weighted_silhouette(Z, labels, w) == weighted_silhouette(Z[:4], labels[:4])


def test_combined_score_examples():
    assert combined_score(1, 1) == 1.0
    assert combined_score(-1, 0) == 0.0
    assert abs(combined_score(0.2, 0.8) - 0.7) < 1e-15
    with pytest.raises(ContractViolation):
        combined_score(1.5, 0.5)
    with pytest.raises(ContractViolation):
        combined_score(0.5, -0.1)


@given(st.floats(-1, 1), st.floats(0, 1))
def test_combined_score_identity(S, H):
    assert combined_score(S, H) == 0.5 * ((S + 1) / 2 + H)


def test_evaluate_permutation_invariant():
    rng = np.random.default_rng(3)
    y = np.repeat([0, 1, 2], 4)
    T = np.zeros((12, 4))
    T[np.arange(12), [0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 3, 3]] = 1 / 12
    Z = rng.standard_normal((4, 2))
    base = evaluate(Z, T, y)
    perm = rng.permutation(4)
    other = evaluate(Z[perm], T[:, perm], y)
    assert base.homogeneity == other.homogeneity
    assert abs(base.silhouette - other.silhouette) < 1e-12
