"""Smooth acyclicity functions of a nonnegative weighted adjacency matrix.

Three variants are provided, selected by name:

``"expm"``
    ``h(B) = tr(exp(B)) - d``
``"poly"``
    ``h(B) = tr((I + B/d)^d) - d``
``"logdet"``
    ``h(B) = -log det(I - B)``, defined while ``I - B`` is a nonsingular
    M-matrix (spectral radius of ``B`` below one).

Each is zero exactly on DAGs and has a gradient whose ``(i, j)`` entry is
positive iff there is a directed walk from ``j`` to ``i``.
"""

import numpy as np
from scipy.linalg import expm

from .exceptions import NegativeEntryError, SpectralRadiusError
from .graph import check_square

__all__ = ["KINDS", "h_value", "h_grad", "h_value_grad", "check_kind"]

KINDS = ("expm", "poly", "logdet")


def check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"unknown acyclicity kind {kind!r}; expected one of {KINDS}")
    return kind


def _check_nonneg(B):
    B = check_square(B, "B")
    if np.any(B < 0):
        raise NegativeEntryError("acyclicity functions require a nonnegative matrix")
    if not np.all(np.isfinite(B)):
        raise ValueError("B has non-finite entries")
    return B


def _lu_pivots(M):
    """Pivots of Gaussian elimination without row exchanges.

    The k-th pivot is the ratio of consecutive leading principal minors, so all
    pivots are positive iff all leading principal minors are.
    """
    U = np.array(M, dtype=float)
    d = U.shape[0]
    piv = np.empty(d)
    for k in range(d):
        piv[k] = U[k, k]
        if piv[k] <= 0:
            return piv[: k + 1]
        if k + 1 < d:
            U[k + 1 :, k:] -= np.outer(U[k + 1 :, k] / piv[k], U[k, k:])
    return piv


def _m_matrix(B):
    d = B.shape[0]
    M = np.eye(d) - B
    piv = _lu_pivots(M)
    if piv.shape[0] < d or np.any(piv <= 0):
        raise SpectralRadiusError("I - B is not a nonsingular M-matrix")
    return M, piv


def h_value(kind, B):
    """Value of the acyclicity function ``kind`` at ``B``."""
    return h_value_grad(kind, B, need_grad=False)[0]


def h_grad(kind, B):
    """Gradient of ``h_value(kind, .)`` at ``B`` (a ``d x d`` matrix)."""
    return h_value_grad(kind, B)[1]


def h_value_grad(kind, B, need_grad=True):
    check_kind(kind)
    B = _check_nonneg(B)
    d = B.shape[0]
    grad = None
    if kind == "expm":
        E = expm(B)
        value = np.trace(E) - d
        if need_grad:
            grad = E.T
    elif kind == "poly":
        M = np.eye(d) + B / d
        P = np.linalg.matrix_power(M, d - 1) if d > 1 else np.eye(d)
        value = np.sum(P.T * M) - d  # tr(P @ M) without forming the product
        if need_grad:
            grad = P.T
    else:
        M, piv = _m_matrix(B)
        value = -np.sum(np.log(piv))
        if need_grad:
            grad = np.linalg.inv(M).T
    # exact DAGs give tiny negative round-off
    return max(float(value), 0.0), grad
