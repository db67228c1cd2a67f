"""Adjacency matrices, topological orders and structural comparison.

Conventions: a ``d x d`` matrix ``W`` encodes the edge ``i -> j`` in entry
``W[i, j]``. An order (permutation) is a sequence whose position ``k`` holds
the ``k``-th node. Nodes are 0-based in code; the CLI and file formats use the
same 0-based indices.
"""

import heapq

import numpy as np

from .exceptions import CyclicGraphError

__all__ = [
    "check_square",
    "check_order",
    "edge_mask",
    "topological_sort",
    "is_dag",
    "is_consistent",
    "swap",
    "threshold",
    "shd",
    "reachability",
    "forbidden_mask",
]


def check_square(W, name="W"):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {W.shape}")
    return W


def check_order(order, d=None):
    """Validate a permutation and return it as an int array."""
    order = np.asarray(order)
    if order.ndim != 1:
        raise ValueError("order must be one-dimensional")
    if d is None:
        d = order.shape[0]
    if order.shape[0] != d or not np.array_equal(np.sort(order), np.arange(d)):
        raise ValueError(f"order {order.tolist()} is not a permutation of range({d})")
    return order.astype(int)


def edge_mask(W, zero_tol=0.0):
    """Boolean matrix of entries whose magnitude exceeds ``zero_tol``."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    return np.abs(check_square(W)) > zero_tol


def topological_sort(W, zero_tol=0.0, priority=None):
    """Kahn source elimination.

    Among the currently available sources the node with the smallest
    ``priority`` is emitted first; by default the priority is the node index,
    which makes the result deterministic.

    Raises
    ------
    CyclicGraphError
        If the graph (self-loops included) has a directed cycle.
    """
    A = edge_mask(W, zero_tol)
    d = A.shape[0]
    if priority is None:
        priority = np.arange(d)
    priority = np.asarray(priority)
    indeg = A.sum(axis=0).astype(int)
    heap = [(priority[v], v) for v in range(d) if indeg[v] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, v = heapq.heappop(heap)
        out.append(v)
        for c in np.flatnonzero(A[v]):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, (priority[c], c))
    if len(out) != d:
        raise CyclicGraphError("graph contains a directed cycle")
    return np.array(out, dtype=int)


def is_dag(W, zero_tol=0.0):
    try:
        topological_sort(W, zero_tol)
    except CyclicGraphError:
        return False
    return True


def is_consistent(W, order, zero_tol=0.0):
    """True iff every edge of ``W`` points forward in ``order``."""
    A = edge_mask(W, zero_tol)
    order = check_order(order)
    if order.shape[0] != A.shape[0]:
        raise ValueError("order length does not match the matrix dimension")
    permuted = A[np.ix_(order, order)]
    # entries on or below the diagonal of the permuted matrix point backward
    return not np.tril(permuted).any()


def swap(order, i, j):
    """Exchange the positions of nodes ``i`` and ``j``."""
    order = check_order(order)
    d = order.shape[0]
    if not (0 <= i < d and 0 <= j < d):
        raise IndexError(f"nodes ({i}, {j}) out of range for d={d}")
    out = order.copy()
    pi = np.flatnonzero(order == i)[0]
    pj = np.flatnonzero(order == j)[0]
    out[pi], out[pj] = j, i
    return out


def threshold(W, omega=0.3):
    """Binary adjacency with 1 where ``|w_ij| > omega``."""
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    return (np.abs(check_square(W)) > omega).astype(int)


def shd(est, truth):
    """Structural Hamming distance; a reversed edge counts once.

    Each unordered node pair is compared on its own. Identical edge sets cost
    nothing, a single edge pointing the other way costs one reversal, and any
    other mismatch costs the size of the symmetric difference.
    """
    E = check_square(est) != 0
    T = check_square(truth) != 0
    if E.shape != T.shape:
        raise ValueError(f"dimension mismatch: {E.shape} vs {T.shape}")
    iu = np.triu_indices(E.shape[0], k=1)
    e_fwd, e_bwd = E[iu], E.T[iu]
    t_fwd, t_bwd = T[iu], T.T[iu]
    diff = (e_fwd != t_fwd).astype(int) + (e_bwd != t_bwd).astype(int)
    reversed_ = (e_fwd != e_bwd) & (t_fwd != t_bwd) & (e_fwd == t_bwd)
    cost = np.where(reversed_, 1, diff)
    loops = int(np.sum(np.diag(E) != np.diag(T)))
    return int(cost.sum()) + loops


def reachability(W, zero_tol=0.0):
    """``R[i, j]`` is True iff there is a directed walk of length >= 1 from i to j."""
    A = edge_mask(W, zero_tol)
    d = A.shape[0]
    R = A.copy()
    # Warshall closure; d is small enough that the O(d^3) boolean pass is cheap
    for k in range(d):
        R |= np.outer(R[:, k], R[k, :])
    return R


def forbidden_mask(order):
    """Mask of entries ``(order[p], order[q])`` with ``q <= p``.

    These are the backward pairs (and the diagonal) that an order-constrained
    fit pins to zero.
    """
    order = check_order(order)
    d = order.shape[0]
    pos = np.empty(d, dtype=int)
    pos[order] = np.arange(d)
    return pos[:, None] >= pos[None, :]
