"""Score functions with values and exact gradients.

Every score is a sum of per-node terms, each depending only on the parameters
of that node's equation. The per-node pieces (:func:`node_loss` and
:func:`penalty`) are what the order-constrained solver uses; the whole-model
functions below assemble them.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import NonBinaryDataError, SingularTruthError, ZeroResidualError
from .models import LinearParams, MLPParams, backward, forward

__all__ = [
    "SCORE_KINDS",
    "ScoreSpec",
    "ScoreEval",
    "mcp",
    "mcp_grad",
    "node_loss",
    "penalty",
    "penalty_magnitude",
    "least_squares",
    "gaussian_nll",
    "logistic",
    "population_ls",
    "population_covariance",
    "evaluate",
]

SCORE_KINDS = ("ls", "nll-mcp", "logistic", "population")
CONVEX = {"ls": True, "nll-mcp": False, "logistic": True, "population": True}
RSS_FLOOR = 1e-12


@dataclass(frozen=True)
class ScoreSpec:
    """Which score to use and its penalty constants.

    ``population_truth`` is required for ``kind="population"`` and is the
    weight matrix of the linear SEM whose covariance defines the expectation.
    ``l2_lambda`` adds ``(l2_lambda / 2) * ||params||^2`` over every model
    parameter; it keeps MLP fits well conditioned and is off by default.
    """

    kind: str = "ls"
    mcp_lambda: float = 0.005
    mcp_beta: float = 10.0
    l1_lambda: float = 0.01
    population_truth: np.ndarray = None
    l2_lambda: float = 0.0

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score {self.kind!r}; expected one of {SCORE_KINDS}")
        if self.mcp_lambda < 0 or self.mcp_beta <= 0 or self.l1_lambda < 0 or self.l2_lambda < 0:
            raise ValueError("penalty constants must be nonnegative (beta > 0)")
        if self.kind == "population" and self.population_truth is None:
            raise ValueError("population score requires population_truth")

    @property
    def convex(self):
        return CONVEX[self.kind]

    @property
    def separable(self):
        return True

    @property
    def nonsmooth(self):
        """True when an L1-type sparsity penalty is active."""
        return (self.kind == "nll-mcp" and self.mcp_lambda > 0) or (self.kind == "logistic" and self.l1_lambda > 0)


@dataclass(frozen=True, eq=False)
class ScoreEval:
    value: float
    grad: object
    separable: bool = True


def mcp(w, lam, beta):
    """Minimax concave penalty, elementwise."""
    a = np.abs(w)
    return np.where(a <= beta * lam, lam * a - a**2 / (2 * beta), beta * lam**2 / 2)


def mcp_grad(w, lam, beta):
    # subgradient 0 at w == 0
    a = np.abs(w)
    return np.where(a <= beta * lam, np.sign(w) * (lam - a / beta), 0.0)


def penalty(spec, edges):
    """Sparsity penalty on per-edge parameters and its (sub)gradient."""
    if spec.kind == "nll-mcp" and spec.mcp_lambda > 0:
        return float(mcp(edges, spec.mcp_lambda, spec.mcp_beta).sum()), mcp_grad(
            edges, spec.mcp_lambda, spec.mcp_beta
        )
    if spec.kind == "logistic" and spec.l1_lambda > 0:
        return float(spec.l1_lambda * np.abs(edges).sum()), spec.l1_lambda * np.sign(edges)
    return 0.0, np.zeros_like(edges)


def penalty_magnitude(spec, a):
    """Sparsity penalty as a function of magnitudes ``a >= 0``, with its derivative.

    Unlike :func:`penalty` the derivative at ``a = 0`` is the one-sided value,
    which makes the split form ``theta = u - v`` with ``u, v >= 0`` smooth.
    """
    if spec.kind == "nll-mcp" and spec.mcp_lambda > 0:
        lam, beta = spec.mcp_lambda, spec.mcp_beta
        return float(mcp(a, lam, beta).sum()), np.where(a <= beta * lam, lam - a / beta, 0.0)
    if spec.kind == "logistic" and spec.l1_lambda > 0:
        return float(spec.l1_lambda * a.sum()), np.full_like(a, spec.l1_lambda)
    return 0.0, np.zeros_like(a)


def node_loss(spec, x, f):
    """Data term of one node: value and derivative with respect to ``f``.

    ``x`` is the observed column, ``f`` the model prediction for it.
    """
    n = x.shape[0]
    if spec.kind == "ls":
        r = x - f
        return 0.5 * (r @ r) / n, -r / n
    if spec.kind == "nll-mcp":
        r = x - f
        rss = max(r @ r, RSS_FLOOR)
        return 0.5 * np.log(rss), -r / rss
    if spec.kind == "logistic":
        return float(np.sum(np.logaddexp(0.0, f) - x * f) / n), (expit(f) - x) / n
    raise ValueError(f"score {spec.kind!r} has no data term")


def _with_penalty(spec, value, grad, params):
    pv, pg = penalty(spec, params.edges())
    if pv != 0.0 or np.any(pg):
        value, grad = value + pv, grad.with_edges(grad.edges() + pg)
    if spec.l2_lambda > 0:
        lam = spec.l2_lambda
        if params.kind == "linear":
            value += 0.5 * lam * np.sum(params.theta**2)
            grad = LinearParams(grad.theta + lam * params.theta)
        else:
            value += 0.5 * lam * (np.sum(params.A1**2) + np.sum(params.A2**2))
            grad = MLPParams(grad.A1 + lam * params.A1, grad.A2 + lam * params.A2)
    return value, grad


def _data_score(spec, params, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.d:
        raise ValueError(f"X must have shape (n, {params.d}), got {X.shape}")
    if X.shape[0] < 1:
        raise ValueError("X must have at least one row")
    F = forward(params, X)
    value = 0.0
    dF = np.empty_like(F)
    for j in range(params.d):
        v, dF[:, j] = node_loss(spec, X[:, j], F[:, j])
        value += v
    grad = backward(params, X, dF)
    value, grad = _with_penalty(spec, value, grad, params)
    return ScoreEval(float(value), grad)


def least_squares(params, X):
    """``(1/2n) sum_j ||x_j - f_j(X)||^2``."""
    return _data_score(ScoreSpec("ls"), params, X)


def gaussian_nll(params, X, mcp_lambda=0.005, mcp_beta=10.0):
    """``(1/2) sum_j log ||x_j - f_j(X)||^2`` plus MCP on every edge parameter."""
    spec = ScoreSpec("nll-mcp", mcp_lambda=mcp_lambda, mcp_beta=mcp_beta)
    R = np.asarray(X, dtype=float) - forward(params, X)
    if np.any(np.sum(R**2, axis=0) < RSS_FLOOR):
        raise ZeroResidualError("a residual norm is numerically zero")
    return _data_score(spec, params, X)


def check_binary(X):
    X = np.asarray(X, dtype=float)
    if not np.all((X == 0) | (X == 1)):
        raise NonBinaryDataError("logistic score requires data in {0, 1}")
    return X


def logistic(params, X, l1_lambda=0.01):
    """Mean Bernoulli negative log-likelihood with logits ``f_j(X)`` plus L1."""
    X = check_binary(X)
    return _data_score(ScoreSpec("logistic", l1_lambda=l1_lambda), params, X)


def population_covariance(W_true):
    """Covariance of ``x = W_true^T x + z`` with ``z ~ N(0, I)``."""
    W_true = np.asarray(W_true, dtype=float)
    d = W_true.shape[0]
    M = np.eye(d) - W_true
    if np.linalg.cond(M) > 1e12:
        raise SingularTruthError("I - W_true is singular")
    Minv = np.linalg.inv(M)
    return Minv.T @ Minv


def population_ls(params, W_true):
    """Expected squared residual ``E ||x^T (I - W)||^2`` under the true SEM.

    Equals ``d`` at ``W = W_true``.
    """
    if params.kind != "linear":
        raise ValueError("population score is defined for linear parameters only")
    S = population_covariance(W_true)
    if S.shape != params.theta.shape:
        raise ValueError("W_true dimension does not match params")
    D = np.eye(params.d) - params.theta
    value = float(np.sum(D * (S @ D)))
    return ScoreEval(value, LinearParams(-2.0 * S @ D))


def evaluate(spec, params, X=None):
    """Dispatch on ``spec.kind``."""
    if spec.kind == "population":
        return population_ls(params, spec.population_truth)
    if spec.kind == "logistic":
        X = check_binary(X)
    return _data_score(spec, params, X)
