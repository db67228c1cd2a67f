"""File formats.

Matrices (weights, adjacency, data) are headerless comma-separated text with
one row per line; weight row ``i`` holds the outgoing weights of node ``i``.
Values are written with 17 significant digits so they round-trip exactly.
MLP parameters are JSON ``{"d", "m1", "nodes": [{"A1", "A2"}, ...]}`` with
``A1`` given row-major as ``m1`` rows of ``d`` values.
"""

import json
import warnings
from pathlib import Path

import numpy as np

from .models import MLPParams

__all__ = ["load_matrix", "save_matrix", "load_mlp", "save_mlp", "save_json", "load_json"]


def save_matrix(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, M, fmt="%.17g", delimiter=",")


def load_matrix(path):
    """Read a CSV matrix; raises ``ValueError`` on malformed or non-finite content."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty file, reported below
            M = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed CSV matrix ({exc})") from exc
    if M.size == 0:
        raise ValueError(f"{path}: empty matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{path}: non-finite entries")
    return M


def save_mlp(path, params):
    doc = {
        "d": params.d,
        "m1": params.m,
        "nodes": [{"A1": params.A1[j].tolist(), "A2": params.A2[j].tolist()} for j in range(params.d)],
    }
    save_json(path, doc)


def load_mlp(path):
    doc = load_json(path)
    try:
        d, m = int(doc["d"]), int(doc["m1"])
        A1 = np.array([node["A1"] for node in doc["nodes"]], dtype=float).reshape(d, m, d)
        A2 = np.array([node["A2"] for node in doc["nodes"]], dtype=float).reshape(d, m)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed MLP document ({exc})") from exc
    return MLPParams(A1, A2)


def save_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc
