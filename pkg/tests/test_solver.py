import itertools

import numpy as np
import pytest

from toposwap.datagen import make_instance
from toposwap.graph import forbidden_mask, swap
from toposwap.scores import ScoreSpec, evaluate
from toposwap.solver import OrderSolver, SolveOptions, solve_all_swaps, solve_order

W3 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, -0.55], [0.0, 0.0, 0.0]])


@pytest.fixture(scope="module")
def chain2():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((1000, 2))
    X[:, 1] += 1.5 * X[:, 0]
    return X


def test_two_node_ols(chain2):
    sol = solve_order([0, 1], "ls", chain2)
    x, y = chain2[:, 0], chain2[:, 1]
    assert sol.theta_star.theta[0, 1] == pytest.approx((x @ y) / (x @ x), rel=1e-12)
    assert sol.theta_star.theta[1, 0] == 0.0
    assert sol.converged


def test_population_true_order():
    sol = solve_order([0, 1, 2], ScoreSpec("population", population_truth=W3))
    np.testing.assert_allclose(sol.theta_star.theta, W3, atol=1e-12)
    assert sol.score_value == pytest.approx(3.0)


def test_population_minimized_at_true_order():
    solver = OrderSolver(ScoreSpec("population", population_truth=W3))
    values = {p: solver.solve(np.array(p)).score_value for p in itertools.permutations(range(3))}
    best = min(values, key=values.get)
    assert best == (0, 1, 2)
    assert all(v > 3.0 for p, v in values.items() if p != (0, 1, 2))


def test_single_node():
    X = np.random.default_rng(1).standard_normal((10, 1))
    sol = solve_order([0], "ls", X)
    assert sol.theta_star.theta.shape == (1, 1)
    assert sol.score_value == pytest.approx(0.5 * np.mean(X**2))


@pytest.mark.parametrize(
    "spec,model,noise",
    [
        (ScoreSpec("ls"), "linear", "gauss-ev"),
        (ScoreSpec("nll-mcp"), "linear", "gauss-ev"),
        (ScoreSpec("logistic"), "linear", "logistic"),
        (ScoreSpec("ls", l2_lambda=1e-4), "mlp", "mlp"),
    ],
)
def test_backward_entries_exactly_zero_and_stationary(spec, model, noise):
    inst = make_instance("er", 4, 1, 200, noise, 3, hidden_units=4)
    solver = OrderSolver(spec, inst.X, model=model, hidden_units=4)
    order = np.array([2, 0, 3, 1])
    sol = solver.solve(order)
    W = sol.theta_star.edge_l1()
    assert np.all(W[forbidden_mask(order)] == 0.0)
    assert sol.converged
    # the reported value and gradient agree with the whole-model score
    ev = evaluate(spec, sol.theta_star, inst.X)
    assert ev.value == pytest.approx(sol.score_value, rel=1e-10)
    free = ~forbidden_mask(order)
    G = ev.grad.edge_l1()
    # sparsity penalties: a zero edge is optimal when the smooth gradient sits inside [-lam, lam]
    lam = spec.mcp_lambda if spec.kind == "nll-mcp" else spec.l1_lambda if spec.kind == "logistic" else 0.0
    slack = np.where(W == 0, lam, 0.0)
    assert np.all(np.abs(G[free]) <= slack[free] + 1e-5)


def test_iterative_matches_closed_form():
    inst = make_instance("er", 5, 1, 300, "gauss-ev", 4)
    order = np.array([4, 2, 0, 1, 3])
    exact = solve_order(order, "ls", inst.X)
    it = OrderSolver("ls", inst.X)
    it.exact = False  # force the iterative path
    sol = it.solve(order)
    assert sol.score_value == pytest.approx(exact.score_value, abs=1e-10)


@pytest.mark.parametrize("optimizer", ["gd", "adam"])
def test_other_optimizers_reach_the_optimum(optimizer):
    inst = make_instance("er", 3, 1, 200, "gauss-ev", 5)
    exact = solve_order([0, 1, 2], "ls", inst.X)
    solver = OrderSolver("ls", inst.X, options=SolveOptions(optimizer=optimizer, tol=1e-6, max_iters=50000))
    solver.exact = False
    assert solver.solve(np.array([0, 1, 2])).score_value == pytest.approx(exact.score_value, abs=1e-8)


def test_warm_and_cold_agree():
    inst = make_instance("er", 4, 1, 200, "gauss-ev", 6)
    spec = ScoreSpec("nll-mcp")
    solver = OrderSolver(spec, inst.X)
    first = solver.solve(np.array([0, 1, 2, 3]))
    cold = solver.solve(np.array([1, 0, 2, 3]))
    warm = solver.solve(np.array([1, 0, 2, 3]), warm_start=first.theta_star)
    assert warm.score_value == pytest.approx(cold.score_value, abs=10 * solver.tol)


def test_cache_reuse_is_bit_identical():
    inst = make_instance("er", 6, 2, 300, "gauss-ev", 7)
    solver = OrderSolver("ls", inst.X)
    a = solver.solve(np.arange(6))
    n = solver.cache_size()
    b = solver.solve(np.arange(6))
    assert solver.cache_size() == n
    assert a.score_value == b.score_value
    # swapping the last two nodes refits only those two
    solver.solve(swap(np.arange(6), 4, 5))
    assert solver.cache_size() == n + 2


def test_rank_deficient_gram_is_jittered():
    X = np.random.default_rng(8).standard_normal((50, 3))
    X[:, 1] = X[:, 0]
    sol = solve_order([0, 1, 2], "ls", X)
    assert "jitter" in sol.flags


def test_solve_all_swaps():
    inst = make_instance("er", 6, 2, 300, "gauss-ev", 9)
    solver = OrderSolver("ls", inst.X)
    order = np.arange(6)
    assert solve_all_swaps(solver, order, []) == []
    (single,) = solve_all_swaps(solver, order, [(1, 4)])
    assert single.solution.score_value == solve_order(swap(order, 1, 4), "ls", inst.X).score_value
    pairs = list(itertools.combinations(range(6), 2))
    seq = solve_all_swaps(OrderSolver("ls", inst.X), order, pairs)
    par = solve_all_swaps(OrderSolver("ls", inst.X), order, pairs, n_jobs=4)
    assert [r.pair for r in par] == pairs
    for r, s in zip(seq, par):
        np.testing.assert_array_equal(r.solution.theta_star.theta, s.solution.theta_star.theta)
        assert r.solution.score_value == s.solution.score_value


def test_failed_swap_is_recorded():
    inst = make_instance("er", 3, 1, 50, "gauss-ev", 10)

    def bad(order, pair):
        raise RuntimeError("boom")

    (res,) = solve_all_swaps(OrderSolver("ls", inst.X), np.arange(3), [(0, 1)], update=bad)
    assert res.solution is None and isinstance(res.error, RuntimeError)


def test_input_validation():
    with pytest.raises(ValueError):
        OrderSolver("ls")
    with pytest.raises(ValueError):
        OrderSolver(ScoreSpec("population", population_truth=W3), model="mlp")
    with pytest.raises(ValueError):
        SolveOptions(tol=0)
    with pytest.raises(ValueError):
        SolveOptions(optimizer="newton")
    with pytest.raises(ValueError):
        OrderSolver("ls", np.zeros((3, 2))).solve([0, 2])
