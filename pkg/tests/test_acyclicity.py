import numpy as np
import pytest

from toposwap.acyclicity import KINDS, h_grad, h_value, h_value_grad
from toposwap.datagen import make_rng, random_dag
from toposwap.exceptions import NegativeEntryError, SpectralRadiusError
from toposwap.graph import is_dag, topological_sort


@pytest.mark.parametrize("kind", KINDS)
def test_zero_matrix(kind):
    assert h_value(kind, np.zeros((4, 4))) == 0.0


def test_two_cycle_values():
    B = np.array([[0.0, 0.5], [0.5, 0.0]])
    assert h_value("logdet", B) == pytest.approx(-np.log(0.75), abs=1e-12)
    assert h_value("poly", B) == pytest.approx(0.125, abs=1e-12)
    assert h_value("expm", B) == pytest.approx(2 * np.cosh(0.5) - 2, abs=1e-12)


def test_expm_gradient_single_edge():
    t = 0.7
    G = h_grad("expm", np.array([[0.0, t], [0.0, 0.0]]))
    np.testing.assert_allclose(G, [[1.0, 0.0], [t, 1.0]], atol=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_finite_differences(kind):
    rng = np.random.default_rng(0)
    for _ in range(5):
        B = rng.uniform(0.05, 0.3, (4, 4))
        G = h_grad(kind, B)
        fd = np.zeros_like(B)
        for i in range(4):
            for j in range(4):
                E = np.zeros_like(B)
                E[i, j] = 1e-6
                fd[i, j] = (h_value(kind, B + E) - h_value(kind, B - E)) / 2e-6
        assert np.linalg.norm(fd - G) / np.linalg.norm(G) <= 1e-5


@pytest.mark.parametrize("kind", KINDS)
def test_random_eight_node_level_set(kind):
    rng = np.random.default_rng(1)
    for _ in range(100):
        A = (rng.random((8, 8)) < 0.15) * rng.uniform(0.05, 0.1, (8, 8))
        assert (h_value(kind, A) == 0.0) == is_dag(A, zero_tol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_vanishes_on_backward_pairs_of_a_dag(kind):
    B = random_dag("er", 8, 2, make_rng(3)) * 0.4
    G = h_grad(kind, B)
    order = topological_sort(B)
    for p in range(8):
        for q in range(p + 1, 8):
            assert G[order[p], order[q]] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_positive_on_walks(kind):
    # walk 0 -> 1 -> 2, so entries (1, 0), (2, 1), (2, 0) are positive
    B = np.zeros((3, 3))
    B[0, 1] = B[1, 2] = 0.5
    G = h_grad(kind, B)
    assert G[1, 0] > 0 and G[2, 1] > 0 and G[2, 0] > 0


def test_negative_entries_rejected():
    with pytest.raises(NegativeEntryError):
        h_value("poly", -np.eye(2))


def test_logdet_domain_guard():
    B = np.array([[0.0, 1.5], [1.5, 0.0]])
    with pytest.raises(SpectralRadiusError):
        h_value("logdet", B)


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown"):
        h_value("trace", np.zeros((2, 2)))


def test_value_grad_consistent():
    B = np.array([[0.0, 0.2], [0.3, 0.0]])
    v, g = h_value_grad("poly", B)
    assert v == h_value("poly", B)
    np.testing.assert_array_equal(g, h_grad("poly", B))


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        h_value("expm", np.array([[0.0, np.inf], [0.0, 0.0]]))
