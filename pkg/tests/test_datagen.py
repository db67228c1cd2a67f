import numpy as np
import pytest

from toposwap.datagen import (
    assign_weights,
    make_instance,
    make_rng,
    random_dag,
    simulate_linear,
    simulate_logistic,
    simulate_mlp,
)
from toposwap.graph import is_dag, topological_sort
from toposwap.scores import least_squares
from toposwap.models import LinearParams


def test_er_mean_edge_count():
    counts = [random_dag("er", 100, 4, make_rng(s)).sum() for s in range(100)]
    assert abs(np.mean(counts) - 400) <= 40


@pytest.mark.parametrize("kind", ["er", "sf", "full"])
def test_always_acyclic(kind):
    for s in range(1000):
        assert is_dag(random_dag(kind, 8, 2, make_rng(s)))


def test_full_graph_edge_count():
    assert random_dag("full", 10, rng=make_rng(0)).sum() == 45


def test_scale_free_edges_per_node():
    B = random_dag("sf", 30, 2, make_rng(1))
    # every node after the first two adds exactly k edges
    assert B.sum() == 1 + 2 * 28


def test_graph_validation():
    with pytest.raises(ValueError):
        random_dag("tree", 5)
    with pytest.raises(ValueError):
        random_dag("er", 0)
    with pytest.raises(ValueError):
        random_dag("sf", 3, 3, make_rng(0))


def test_weights_magnitude_and_sign_balance():
    B = np.triu(np.ones((60, 60)), 1)
    W = assign_weights(B, make_rng(2))
    vals = W[B != 0]
    assert np.all((np.abs(vals) >= 0.5) & (np.abs(vals) <= 2.0))
    assert np.all(W[B == 0] == 0)
    assert abs(np.mean(vals > 0) - 0.5) < 0.05


def test_empty_graph_covariance_is_identity():
    X = simulate_linear(np.zeros((4, 4)), "gauss-ev", 20000, make_rng(3))
    np.testing.assert_allclose(np.cov(X.T), np.eye(4), atol=0.05)


def test_exponential_sources_nonnegative():
    X = simulate_linear(np.zeros((3, 3)), "exp", 500, make_rng(4))
    assert X.min() >= 0


def test_logistic_sources_are_fair_coins():
    X = simulate_logistic(np.zeros((3, 3)), 20000, make_rng(5))
    assert set(np.unique(X)) <= {0.0, 1.0}
    np.testing.assert_allclose(X.mean(axis=0), 0.5, atol=0.02)


def test_mlp_masks_non_parents():
    B = random_dag("er", 6, 2, make_rng(6))
    truth, X = simulate_mlp(B, 100, make_rng(7), hidden_units=5)
    assert np.array_equal(truth.edge_l1() != 0, B != 0)
    assert X.shape == (100, 6)


def test_seed_determinism():
    a = make_instance("er", 10, 2, 200, "gumbel", seed=11)
    b = make_instance("er", 10, 2, 200, "gumbel", seed=11)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.truth, b.truth)
    c = make_instance("er", 10, 2, 200, "gumbel", seed=12)
    assert not np.array_equal(a.X, c.X)


def test_ls_at_truth_is_half_d():
    inst = make_instance("er", 10, 2, 5000, "gauss-ev", seed=13)
    value = least_squares(LinearParams(inst.truth), inst.X).value
    assert value == pytest.approx(5.0, rel=0.05)


def test_samples_follow_topological_order():
    inst = make_instance("er", 6, 1, 50, "gauss-ev", seed=14)
    order = topological_sort(inst.W)
    # a source column is pure noise
    src = order[0]
    assert not inst.W[:, src].any()


def test_unknown_noise():
    with pytest.raises(ValueError):
        make_instance(noise="cauchy")
