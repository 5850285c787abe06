import itertools

import numpy as np
import pytest

from distr.affinity import SimilarityGraph
from distr.clustering import membership_matrix
from distr.errors import ContractViolation
from distr.loss import gw_objective_bruteforce
from distr.srgw import (
    SrgwProblem, barycenter_step, cg_solve, exact_line_search, gradient_reduced, linear_oracle,
    md_solve, objective_constant, objective_reduced, optimal_step, smooth_coupling, srgw_barycenter,
    srgw_divergence,
)

from _instances import dense, random_coupling, random_graphs, random_instance

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
HALF = np.array([[0.5], [0.5]])


def test_objective_hand_example():
    assert objective_reduced(SWAP, np.zeros((1, 1)), HALF, "l2") == 0.0
    assert objective_constant(SWAP, "l2", np.array([0.5, 0.5])) == 0.5


def test_zero_target_gives_zero_objective_and_gradient():
    rng = np.random.default_rng(0)
    Cx, _, _ = random_instance(rng, 6, 3)
    T = random_coupling(rng, Cx.h, 3)
    assert objective_reduced(Cx.C, np.zeros((3, 3)), T, "l2") == 0.0
    np.testing.assert_array_equal(gradient_reduced(Cx.C, np.zeros((3, 3)), T, "l2"), 0.0)


@pytest.mark.parametrize("loss", ["l2", "kl"])
@pytest.mark.parametrize("path", ["dense", "lowrank"])
def test_objective_matches_bruteforce(loss, path):
    rng = np.random.default_rng(1)
    Cx, Cz, T = random_instance(rng, 8, 4, loss)
    val = objective_reduced(Cx, Cz, T, loss, path=path) + objective_constant(Cx, loss, T.sum(1))
    assert abs(val - gw_objective_bruteforce(Cx, Cz, T, loss)) < 1e-10
    assert abs(SrgwProblem(Cx, Cz, loss, path=path).constant() - objective_constant(Cx, loss)) < 1e-12


@pytest.mark.parametrize("loss", ["l2", "kl"])
def test_gradient_paths_agree(loss):
    rng = np.random.default_rng(2)
    Cx, Cz, T = random_instance(rng, 8, 4, loss)
    np.testing.assert_allclose(
        gradient_reduced(Cx, Cz, T, loss, path="lowrank"), gradient_reduced(Cx, Cz, T, loss, path="dense"),
        rtol=1e-10, atol=1e-12)


def test_gradient_asymmetric_target():
    rng = np.random.default_rng(3)
    C = rng.random((5, 5))
    Cbar = rng.random((3, 3))
    T = random_coupling(rng, np.full(5, 0.2), 3)
    G = gradient_reduced(C, Cbar, T, "l2")
    fd = np.zeros_like(T)
    for i, k in itertools.product(range(5), range(3)):
        E = np.zeros_like(T)
        E[i, k] = 1e-6
        fd[i, k] = (objective_reduced(C, Cbar, T + E) - objective_reduced(C, Cbar, T - E)) / 2e-6
    np.testing.assert_allclose(G, fd, rtol=1e-6, atol=1e-9)


def test_lowrank_path_requires_factors():
    with pytest.raises(ContractViolation):
        SrgwProblem(np.eye(2), np.eye(2), path="lowrank")


def test_linear_oracle_examples():
    X = linear_oracle(np.array([[3.0, 1.0], [2.0, 5.0]]), np.array([0.5, 0.5]))
    np.testing.assert_array_equal(X, [[0, 0.5], [0.5, 0]])
    np.testing.assert_array_equal(linear_oracle(np.array([[1.0, 1.0]]), np.array([1.0])), [[1.0, 0.0]])


def test_linear_oracle_vertex_enumeration():
    rng = np.random.default_rng(4)
    G = rng.standard_normal((4, 3))
    h = np.array([0.1, 0.2, 0.3, 0.4])
    X = linear_oracle(G, h)
    best = min(sum(h[i] * G[i, c] for i, c in enumerate(cols)) for cols in itertools.product(range(3), repeat=4))
    assert abs(np.sum(X * G) - best) < 1e-14
    assert abs(np.sum(X * G) - h @ G.min(axis=1)) < 1e-14


def test_optimal_step_examples():
    assert optimal_step(1.0, -1.0) == 0.5
    assert optimal_step(-2.0, 1.0) == 1.0
    assert optimal_step(0.0, 1.0) == 0.0
    assert optimal_step(2.0, 5.0) == 0.0


@pytest.mark.parametrize("loss", ["l2", "kl"])
def test_line_search_polynomial(loss):
    rng = np.random.default_rng(5)
    Cx, Cz, T = random_instance(rng, 7, 3, loss)
    D = linear_oracle(gradient_reduced(Cx, Cz, T, loss), Cx.h) - T
    gamma, a, b = exact_line_search(Cx, Cz, T, D, loss)
    c = objective_reduced(Cx, Cz, T, loss)
    for g in (0, 0.25, 0.5, 0.75, 1.0):
        assert abs(a * g * g + b * g + c - objective_reduced(Cx, Cz, T + g * D, loss)) < 1e-9
    assert 0.0 <= gamma <= 1.0


def test_cg_single_target_node():
    rng = np.random.default_rng(6)
    Cx, Cz, _ = random_instance(rng, 5, 1)
    T, report = cg_solve(Cx, Cz, "l2")
    np.testing.assert_allclose(T[:, 0], Cx.h)
    assert report.iterations == 0


def test_cg_block_diagonal_reaches_zero():
    blocks = [2, 3, 4]
    N, n = sum(blocks), len(blocks)
    labels = np.repeat(np.arange(n), blocks)
    values = np.array([1.0, 2.0, 3.0])
    C = np.diag(values)[labels][:, labels]
    h = np.full(N, 1 / N)
    from distr.clustering import spectral_clustering
    T0 = membership_matrix(spectral_clustering(C, n).labels, n, h)
    # match prototype order to the block values using the initial coarsening
    Cbar = barycenter_step(C, T0)
    T, report = cg_solve(SimilarityGraph(C, h), Cbar, "l2", T0)
    assert report.final_objective + objective_constant(C, "l2", h) < 1e-6


@pytest.mark.parametrize("loss", ["l2", "kl"])
def test_cg_trace_non_increasing(loss):
    rng = np.random.default_rng(7)
    for _ in range(50):
        Cx, Cz, T0 = random_instance(rng, loss=loss)
        _, report = cg_solve(Cx, Cz, loss, T0)
        tr = np.array(report.objective_trace)
        assert np.all(np.diff(tr) <= 1e-9 * np.maximum(1.0, np.abs(tr[:-1])))


@pytest.mark.parametrize("loss", ["l2", "kl"])
def test_md_descends_and_keeps_marginals(loss):
    rng = np.random.default_rng(8)
    for _ in range(50):
        Cx, Cz, T0 = random_instance(rng, loss=loss)
        T, report = md_solve(Cx, Cz, loss, T0, epsilon=1.0, max_iter=200)
        assert report.final_objective <= objective_reduced(Cx, Cz, T0, loss) + 1e-12
        assert np.max(np.abs(T.sum(1) - Cx.h)) < 1e-12
        tr = np.array(report.objective_trace)
        assert np.all(np.diff(tr) <= 1e-9 * np.maximum(1.0, np.abs(tr[:-1])))


def test_md_single_target_node():
    rng = np.random.default_rng(9)
    Cx, Cz, _ = random_instance(rng, 4, 1)
    T, _ = md_solve(Cx, Cz, "l2")
    np.testing.assert_allclose(T[:, 0], Cx.h, atol=1e-15)


def test_md_needs_positive_start():
    Cx, Cz = random_graphs(np.random.default_rng(0), 3, 2)
    with pytest.raises(ContractViolation):
        md_solve(Cx, Cz, "l2", membership_matrix([0, 1, 0], 2, Cx.h))


def test_barycenter_examples():
    rng = np.random.default_rng(10)
    Cx, _ = random_graphs(rng, 5, 2)
    np.testing.assert_allclose(barycenter_step(Cx.C, np.diag(Cx.h)), Cx.C, atol=1e-12)
    np.testing.assert_allclose(barycenter_step(SWAP, HALF), [[0.5]])
    T = random_coupling(rng, Cx.h, 3)
    T[:, 1] = 0
    T *= (Cx.h / T.sum(1))[:, None]
    Cbar = barycenter_step(Cx.C, T)
    assert np.all(Cbar[1] == 0) and np.all(Cbar[:, 1] == 0)


def test_srgw_barycenter_improves_start():
    rng = np.random.default_rng(11)
    Cx, _ = random_graphs(rng, 8, 3)
    T0 = random_coupling(rng, Cx.h, 3)
    start = SrgwProblem(Cx.C, barycenter_step(Cx.C, T0), h=Cx.h).full_objective(T0)
    Cbar, T, value = srgw_barycenter(Cx, 3, T0=T0, n_restarts=3)
    assert value <= start + 1e-12
    assert abs(SrgwProblem(Cx.C, Cbar, h=Cx.h).full_objective(T) - value) < 1e-12


def test_divergence_self_and_split():
    rng = np.random.default_rng(12)
    A = rng.random((3, 3))
    C = A + A.T
    G = SimilarityGraph(C, np.full(3, 1 / 3))
    assert srgw_divergence(G, C)[0] < 1e-8
    idx = [0, 1, 2, 2]
    split = SimilarityGraph(C[np.ix_(idx, idx)], np.array([1 / 3, 1 / 3, 1 / 6, 1 / 6]))
    assert srgw_divergence(split, C)[0] < 1e-8


def test_divergence_beats_random_couplings():
    rng = np.random.default_rng(13)
    for _ in range(3):
        Cx, Cz = random_graphs(rng, 6, 3)
        Cx, Cz = dense(Cx), dense(Cz)
        value, _ = srgw_divergence(Cx, Cz)
        R = rng.random((10000, 6, 3))
        P = SrgwProblem(Cx, Cz)
        const = P.constant()
        best = np.inf
        for Tr in R:
            Tr = Tr * (Cx.h / Tr.sum(1))[:, None]
            best = min(best, P.objective(Tr) + const)
        assert value <= best + 1e-12


def test_smooth_coupling_positive_and_feasible():
    h = np.array([0.25, 0.75])
    T = smooth_coupling(membership_matrix([0, 1], 3, h))
    assert np.all(T > 0)
    np.testing.assert_allclose(T.sum(1), h)
