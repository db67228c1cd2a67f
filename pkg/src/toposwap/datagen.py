"""Random DAGs and structural equation model samples.

All generators take an explicit :class:`numpy.random.Generator`.
:func:`make_instance` derives independent streams for the graph, the weights
and the samples from one integer seed through :class:`numpy.random.SeedSequence`
(PCG64 bit generator), so an instance is fully determined by its seed.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .graph import check_square, topological_sort
from .models import MLPParams, forward

__all__ = [
    "GRAPH_KINDS",
    "NOISE_KINDS",
    "SemInstance",
    "random_dag",
    "assign_weights",
    "simulate_linear",
    "simulate_logistic",
    "simulate_mlp",
    "make_instance",
    "make_rng",
]

GRAPH_KINDS = ("er", "sf", "full")
LINEAR_NOISE = ("gauss-ev", "gauss-nv", "exp", "gumbel")
NOISE_KINDS = LINEAR_NOISE + ("logistic", "mlp")
WEIGHT_RANGE = (0.5, 2.0)


def make_rng(seed, *key):
    """PCG64 generator for ``seed`` and an optional spawn key."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _relabel(U, perm):
    """Move position-indexed adjacency ``U`` onto node labels ``perm``."""
    B = np.zeros_like(U)
    B[np.ix_(perm, perm)] = U
    return B


def random_dag(kind, d, k=1, rng=None):
    """Binary DAG adjacency.

    Parameters
    ----------
    kind : {"er", "sf", "full"}
        ``"er"``: each forward pair of a random order is an edge with
        probability ``2k / (d - 1)``, so about ``k * d`` edges in total.
        ``"sf"``: preferential attachment with ``k`` edges per new node,
        oriented from the newer to the older node. ``"full"``: every forward
        pair of a random order.
    d : int
    k : int
        Expected edges per node (ignored for ``"full"``).
    rng : numpy.random.Generator
    """
    if kind not in GRAPH_KINDS:
        raise ValueError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")
    if d < 1:
        raise ValueError("d must be >= 1")
    if kind != "full" and k < 1:
        raise ValueError("k must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    perm = rng.permutation(d)
    U = np.zeros((d, d), dtype=int)
    if kind == "full":
        U[np.triu_indices(d, 1)] = 1
    elif kind == "er":
        if d > 1:
            p = min(1.0, 2.0 * k / (d - 1))
            U = np.triu(rng.random((d, d)) < p, 1).astype(int)
    else:
        if k >= d:
            raise ValueError(f"scale-free graphs need k < d, got k={k}, d={d}")
        deg = np.zeros(d)
        for t in range(1, d):
            m = min(k, t)
            w = deg[:t]
            prob = w / w.sum() if w.sum() > 0 else np.full(t, 1.0 / t)
            targets = rng.choice(t, size=m, replace=False, p=prob)
            U[t, targets] = 1  # new -> old
            deg[targets] += 1
            deg[t] += m
    return _relabel(U, perm)


def _signed_uniform(mask, rng, low=WEIGHT_RANGE[0], high=WEIGHT_RANGE[1]):
    mag = rng.uniform(low, high, size=mask.shape)
    sign = np.where(rng.random(mask.shape) < 0.5, -1.0, 1.0)
    return np.where(mask, sign * mag, 0.0)


def assign_weights(B, rng, low=WEIGHT_RANGE[0], high=WEIGHT_RANGE[1]):
    """Weights with magnitude ``U[low, high]`` and random sign on the support of ``B``."""
    return _signed_uniform(check_square(B, "B") != 0, rng, low, high)


def _noise(kind, n, d, rng):
    if kind == "gauss-ev":
        return rng.standard_normal((n, d))
    if kind == "gauss-nv":
        sigma = rng.uniform(1.0, 2.0, size=d)
        return rng.standard_normal((n, d)) * sigma
    if kind == "exp":
        return rng.exponential(1.0, size=(n, d))
    if kind == "gumbel":
        return rng.gumbel(0.0, 1.0, size=(n, d))
    raise ValueError(f"unknown noise kind {kind!r}; expected one of {LINEAR_NOISE}")


def simulate_linear(W, noise="gauss-ev", n=1000, rng=None):
    """Samples of ``x = W^T x + z`` by forward substitution."""
    W = check_square(W)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    d = W.shape[0]
    Z = _noise(noise, n, d, rng)
    X = np.zeros((n, d))
    for j in topological_sort(W):
        X[:, j] = X @ W[:, j] + Z[:, j]
    return X


def simulate_logistic(W, n=1000, rng=None):
    """Binary samples with ``P(x_j = 1 | x) = sigmoid(w_j^T x)``."""
    W = check_square(W)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    X = np.zeros((n, W.shape[0]))
    for j in topological_sort(W):
        X[:, j] = (rng.random(n) < expit(X @ W[:, j])).astype(float)
    return X


def simulate_mlp(B, n=1000, rng=None, hidden_units=30):
    """Additive-noise samples ``x_j = f_j(x_pa(j)) + z_j`` with random MLPs.

    First-layer columns of non-parents are zero; parent columns and output
    weights follow the linear weight law. ``z_j ~ N(0, 1)``.

    Returns
    -------
    truth : MLPParams
    X : ndarray of shape (n, d)
    """
    B = check_square(B, "B") != 0
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    d, m = B.shape[0], int(hidden_units)
    A1 = np.zeros((d, m, d))
    for j in range(d):
        A1[j] = _signed_uniform(np.tile(B[:, j], (m, 1)), rng)
    A2 = _signed_uniform(np.ones((d, m), dtype=bool), rng)
    truth = MLPParams(A1, A2)
    Z = rng.standard_normal((n, d))
    X = np.zeros((n, d))
    for j in topological_sort(B.astype(float)):
        X[:, j] = forward(truth, X)[:, j] + Z[:, j]
    return truth, X


@dataclass(eq=False)
class SemInstance:
    """A ground-truth model with its samples.

    ``truth`` is a weight matrix for linear and logistic models and an
    :class:`MLPParams` for ``noise="mlp"``; ``B`` is the binary support.
    """

    truth: object
    B: np.ndarray
    X: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def W(self):
        if isinstance(self.truth, MLPParams):
            return self.truth.edge_l1()
        return self.truth


def make_instance(graph="er", d=10, k=1, n=1000, noise="gauss-ev", seed=0, hidden_units=30):
    """Generate one seeded instance; see :func:`random_dag` for the graph kinds."""
    if noise not in NOISE_KINDS:
        raise ValueError(f"unknown noise kind {noise!r}; expected one of {NOISE_KINDS}")
    g_rng, w_rng, x_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(3))
    B = random_dag(graph, d, k, g_rng)
    meta = {"graph": graph, "d": d, "k": k, "n": n, "noise": noise, "seed": int(seed)}
    if graph == "er" and d > 1:
        meta["edge_prob"] = min(1.0, 2.0 * k / (d - 1))
    if noise == "mlp":
        meta["hidden_units"] = int(hidden_units)
        truth, X = simulate_mlp(B, n, x_rng, hidden_units)
    else:
        truth = assign_weights(B, w_rng)
        if noise == "logistic":
            X = simulate_logistic(truth, n, x_rng)
        else:
            X = simulate_linear(truth, noise, n, x_rng)
    return SemInstance(truth, B, X, int(seed), meta)
