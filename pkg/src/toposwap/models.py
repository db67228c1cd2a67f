"""Parametrizations mapping parameters to a weighted adjacency matrix.

Two families are supported:

* :class:`LinearParams` -- one signed scalar per edge, ``theta[i, j]`` is the
  coefficient of ``x_i`` in the equation of ``x_j``.
* :class:`MLPParams` -- one single-hidden-layer sigmoid network per node. The
  network for node ``j`` is ``f_j(x) = A2[j] @ sigmoid(A1[j] @ x)`` and the
  parameters of edge ``i -> j`` are the column ``A1[j][:, i]``. The output
  layer is linear so that unbounded regression targets can be fitted.

Besides the whole-model operations (:func:`weight_matrix`, :func:`forward`,
:func:`backward`) each model class exposes per-node helpers used by the
order-constrained solver, which fits one node at a time.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "LinearParams",
    "MLPParams",
    "LinearModel",
    "MLPModel",
    "make_model",
    "weight_matrix",
    "forward",
    "backward",
    "edge_grad_l1",
    "edge_l1_matrix",
]


def _check_X(X, d):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"X must have shape (n, {d}), got {X.shape}")
    return X


@dataclass(frozen=True, eq=False)
class LinearParams:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
            raise ValueError("theta must be a square matrix")
        np.fill_diagonal(theta, 0.0)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    kind = "linear"

    @property
    def d(self):
        return self.theta.shape[0]

    def edge_l1(self):
        return np.abs(self.theta)

    def with_edges(self, edges):
        """Copy with the per-edge parameters replaced."""
        return LinearParams(edges)

    def edges(self):
        return self.theta

    def zeroed(self, mask):
        """Copy with edges under ``mask`` set to zero."""
        t = self.theta.copy()
        t[mask] = 0.0
        return LinearParams(t)


@dataclass(frozen=True, eq=False)
class MLPParams:
    """``A1`` has shape ``(d, m, d)`` (node, hidden, input); ``A2`` has ``(d, m)``."""

    A1: np.ndarray
    A2: np.ndarray

    def __post_init__(self):
        A1 = np.array(self.A1, dtype=float)
        A2 = np.array(self.A2, dtype=float)
        if A1.ndim != 3 or A1.shape[0] != A1.shape[2]:
            raise ValueError("A1 must have shape (d, m, d)")
        if A2.shape != A1.shape[:2]:
            raise ValueError("A2 must have shape (d, m)")
        d = A1.shape[0]
        A1[np.arange(d), :, np.arange(d)] = 0.0
        A1.setflags(write=False)
        A2.setflags(write=False)
        object.__setattr__(self, "A1", A1)
        object.__setattr__(self, "A2", A2)

    kind = "mlp"

    @property
    def d(self):
        return self.A1.shape[0]

    @property
    def m(self):
        return self.A1.shape[1]

    def edge_l1(self):
        # [i, j] = ||A1[j][:, i]||_1
        return np.abs(self.A1).sum(axis=1).T

    def edges(self):
        return self.A1

    def with_edges(self, edges):
        return MLPParams(edges, self.A2)

    def zeroed(self, mask):
        A1 = self.A1.copy()
        jj, ii = np.nonzero(mask.T)
        A1[jj, :, ii] = 0.0
        return MLPParams(A1, self.A2)


def weight_matrix(params):
    """Nonnegative weighted adjacency ``[W]_ij = ||theta_ij||_1``."""
    return params.edge_l1()


def edge_l1_matrix(grad):
    """Matrix of per-edge L1 norms of a gradient parameter set."""
    return grad.edge_l1()


def edge_grad_l1(grad, i, j):
    """L1 norm of the gradient block belonging to edge ``i -> j``."""
    return float(grad.edge_l1()[i, j])


def forward(params, X):
    """Predictions ``F[:, j] = f_j(X)`` for every node."""
    X = _check_X(X, params.d)
    if params.kind == "linear":
        return X @ params.theta
    H = expit(np.einsum("nk,jmk->jnm", X, params.A1))
    return np.einsum("jnm,jm->nj", H, params.A2)


def backward(params, X, residual_grad):
    """Chain rule from ``dQ/dF`` (shape ``(n, d)``) to ``dQ/dparams``.

    Self-loop entries of the returned gradient are zero.
    """
    X = _check_X(X, params.d)
    G = np.asarray(residual_grad, dtype=float)
    if G.shape != (X.shape[0], params.d):
        raise ValueError(f"residual_grad must have shape {(X.shape[0], params.d)}")
    if params.kind == "linear":
        return LinearParams(X.T @ G)
    H = expit(np.einsum("nk,jmk->jnm", X, params.A1))
    gA2 = np.einsum("jnm,nj->jm", H, G)
    gZ = G.T[:, :, None] * params.A2[:, None, :] * H * (1.0 - H)
    gA1 = np.einsum("jnm,nk->jmk", gZ, X)
    return MLPParams(gA1, gA2)


class LinearModel:
    """Per-node helpers for :class:`LinearParams`.

    A node parameter block is a 1-tuple ``(w,)`` with ``w`` of shape ``(d,)``.
    """

    kind = "linear"

    def node_zeros(self, d):
        return (np.zeros(d),)

    def node_init(self, d, j, rng):
        return self.node_zeros(d)

    def node_predict(self, p, X, free):
        (w,) = p
        return X[:, free] @ w[free]

    def node_backward(self, p, X, df, free):
        return (X.T @ df,)

    def node_edges(self, p):
        """The per-edge parameters of a node block, shaped ``(..., d)``."""
        return p[0]

    def pack(self, p, free):
        return p[0][free].copy()

    def unpack(self, vec, free, d):
        w = np.zeros(d)
        w[free] = vec
        return (w,)

    def pack_grad(self, g, free):
        return g[0][free].copy()

    def stack(self, blocks):
        return LinearParams(np.column_stack([b[0] for b in blocks]))

    def node_block(self, params, j):
        return (params.theta[:, j].copy(),)


class MLPModel:
    """Per-node helpers for :class:`MLPParams` with ``hidden_units`` sigmoid units.

    A node block is ``(A1_j, A2_j)`` with shapes ``(m, d)`` and ``(m,)``.
    """

    kind = "mlp"

    def __init__(self, hidden_units=30, init_scale=0.1):
        if hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        self.hidden_units = int(hidden_units)
        self.init_scale = init_scale

    def node_zeros(self, d):
        m = self.hidden_units
        return (np.zeros((m, d)), np.zeros(m))

    def node_init(self, d, j, rng):
        m = self.hidden_units
        s = self.init_scale
        A1 = rng.uniform(-s, s, size=(m, d))
        A1[:, j] = 0.0
        A2 = rng.uniform(-s, s, size=m)
        return (A1, A2)

    def _hidden(self, p, X, free):
        A1, _ = p
        return expit(X[:, free] @ A1[:, free].T)

    def node_predict(self, p, X, free):
        return self._hidden(p, X, free) @ p[1]

    def node_backward(self, p, X, df, free):
        A1, A2 = p
        H = self._hidden(p, X, free)
        gA2 = H.T @ df
        gZ = np.outer(df, A2) * H * (1.0 - H)
        gA1 = gZ.T @ X
        return (gA1, gA2)

    def node_edges(self, p):
        return p[0]

    def pack(self, p, free):
        return np.concatenate([p[0][:, free].ravel(), p[1]])

    def unpack(self, vec, free, d):
        m = self.hidden_units
        k = len(free)
        A1 = np.zeros((m, d))
        A1[:, free] = vec[: m * k].reshape(m, k)
        return (A1, vec[m * k :].copy())

    def pack_grad(self, g, free):
        return self.pack(g, free)

    def stack(self, blocks):
        return MLPParams(np.stack([b[0] for b in blocks]), np.stack([b[1] for b in blocks]))

    def node_block(self, params, j):
        return (params.A1[j].copy(), params.A2[j].copy())


def make_model(model="linear", hidden_units=30):
    if model == "linear":
        return LinearModel()
    if model == "mlp":
        return MLPModel(hidden_units)
    raise ValueError(f"unknown model {model!r}; expected 'linear' or 'mlp'")
