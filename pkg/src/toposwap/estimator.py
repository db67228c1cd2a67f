"""scikit-learn style front end."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .graph import check_order, threshold, topological_sort
from .models import forward, weight_matrix
from .scores import ScoreSpec
from .search import SearchConfig, topo_search
from .solver import OrderSolver, SolveOptions

__all__ = ["TopoDAG", "MLP_RIDGE"]

MLP_RIDGE = 1e-4


class TopoDAG(BaseEstimator):
    """Learn a DAG by topological swaps.

    Parameters
    ----------
    score : {"ls", "nll-mcp", "logistic", "population"}, default="ls"
    model : {"linear", "mlp"}, default="linear"
    h_kind : {"poly", "expm", "logdet"}, default="poly"
        Acyclicity function used to rank candidate swaps.
    hidden_units : int, default=30
    s_small, s_large, s0 : int, optional
        Search-space sizes and the budget of large-space searches. ``None``
        picks a default from the number of variables.
    greedy : bool, default=False
        Accept the first improving swap instead of the best one.
    init : "random", 1-D array or 2-D array, default="random"
        Initial order, or a weight matrix whose topological sort is used.
    threshold : float, default=0.3
        Cut-off for :attr:`adjacency_`.
    kkt_tol : float, default=1e-6
    tol, max_iters, optimizer : inner solver settings, see :class:`SolveOptions`.
    l2_lambda : float, optional
        Ridge weight on all model parameters. ``None`` means ``1e-4`` for the
        MLP model and 0 for the linear one.
    mcp_lambda, mcp_beta, l1_lambda : float
        Penalty constants of the ``"nll-mcp"`` and ``"logistic"`` scores.
    population_truth : array of shape (d, d), optional
        True weights for ``score="population"``; ``X`` is then ignored.
    max_outer_iters : int, default=500
    n_jobs : int, optional
        Threads used to evaluate candidate swaps.
    random_state : int, RandomState or None, default=0
        Seeds the random initial order and the MLP initialization.

    Attributes
    ----------
    W_ : ndarray of shape (d, d)
        Signed weights for the linear model, edge L1 norms for the MLP.
    adjacency_ : ndarray of shape (d, d)
    order_ : ndarray of shape (d,)
    params_ : LinearParams or MLPParams
    score_value_ : float
    kkt_flag_ : int
    report_ : RunReport

    Examples
    --------
    >>> from toposwap import TopoDAG, make_instance
    >>> inst = make_instance("er", d=5, k=1, n=200, seed=1)
    >>> est = TopoDAG().fit(inst.X)
    >>> est.kkt_flag_
    1
    """

    def __init__(
        self,
        score="ls",
        model="linear",
        h_kind="poly",
        hidden_units=30,
        s_small=None,
        s_large=None,
        s0=None,
        greedy=False,
        init="random",
        threshold=0.3,
        kkt_tol=1e-6,
        tol=None,
        max_iters=10000,
        optimizer="lbfgs",
        l2_lambda=None,
        mcp_lambda=0.005,
        mcp_beta=10.0,
        l1_lambda=0.01,
        population_truth=None,
        max_outer_iters=500,
        n_jobs=None,
        random_state=0,
    ):
        self.score = score
        self.model = model
        self.h_kind = h_kind
        self.hidden_units = hidden_units
        self.s_small = s_small
        self.s_large = s_large
        self.s0 = s0
        self.greedy = greedy
        self.init = init
        self.threshold = threshold
        self.kkt_tol = kkt_tol
        self.tol = tol
        self.max_iters = max_iters
        self.optimizer = optimizer
        self.l2_lambda = l2_lambda
        self.mcp_lambda = mcp_lambda
        self.mcp_beta = mcp_beta
        self.l1_lambda = l1_lambda
        self.population_truth = population_truth
        self.max_outer_iters = max_outer_iters
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _score_spec(self):
        l2 = self.l2_lambda
        if l2 is None:
            l2 = MLP_RIDGE if self.model == "mlp" else 0.0
        truth = None
        if self.population_truth is not None:
            truth = check_array(self.population_truth)
        return ScoreSpec(
            self.score,
            mcp_lambda=self.mcp_lambda,
            mcp_beta=self.mcp_beta,
            l1_lambda=self.l1_lambda,
            population_truth=truth,
            l2_lambda=l2,
        )

    def _initial_order(self, d, rng):
        init = self.init
        if isinstance(init, str):
            if init != "random":
                raise ValueError(f"init must be 'random' or an array, got {init!r}")
            return rng.permutation(d)
        init = np.asarray(init)
        if init.ndim == 1:
            return check_order(init, d)
        if init.shape != (d, d):
            raise ValueError(f"init matrix must have shape {(d, d)}, got {init.shape}")
        return topological_sort(init)

    def fit(self, X=None, y=None):
        """Run the search on ``X`` (n samples by d variables)."""
        spec = self._score_spec()
        if spec.kind == "population":
            X = None
            d = spec.population_truth.shape[0]
        else:
            if X is None:
                raise ValueError(f"score {spec.kind!r} requires X")
            X = check_array(X, ensure_min_samples=1, ensure_min_features=1)
            d = X.shape[1]
        rng = check_random_state(self.random_state)
        seed = int(rng.randint(2**31 - 1))
        order0 = self._initial_order(d, rng)
        options = SolveOptions(tol=self.tol, max_iters=self.max_iters, optimizer=self.optimizer, seed=seed)
        solver = OrderSolver(spec, X, model=self.model, hidden_units=self.hidden_units, options=options)
        config = SearchConfig(
            s_small=self.s_small,
            s_large=self.s_large,
            s0=self.s0,
            greedy=self.greedy,
            h_kind=self.h_kind,
            kkt_tol=self.kkt_tol,
            max_outer_iters=self.max_outer_iters,
            n_jobs=self.n_jobs,
        )
        report = topo_search(order0, solver, config)
        params = report.final.theta_star
        self.report_ = report
        self.params_ = params
        self.order_ = np.asarray(report.final.order)
        self.W_ = params.theta.copy() if params.kind == "linear" else weight_matrix(params)
        self.adjacency_ = threshold(self.W_, self.threshold)
        self.score_value_ = float(report.final.score_value)
        self.kkt_flag_ = int(report.kkt_flag)
        self.n_features_in_ = d
        return self

    def predict(self, X):
        """Model prediction of every column from the others."""
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward(self.params_, X)

