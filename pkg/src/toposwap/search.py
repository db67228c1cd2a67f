"""Topological-swap search over orders.

The outer loop keeps one order and its order-constrained optimum. Each round
it builds a candidate set of node pairs ``(i, j)`` for which adding the edge
``i -> j`` is (nearly) free as far as acyclicity is concerned but the score
gradient on that edge is large, tries the corresponding reorderings and moves
to the best one that strictly lowers the score.

Two candidate sets drive the search:

* the strict set ``Y(0, 0)``: no walk ``j -> i`` and a nonzero gradient. A
  nonempty strict set means the current point is not a KKT point, and the
  "probe" reordering of :func:`update_sort` with ``opt=2`` is guaranteed to
  improve a separable score.
* relaxed sets ``Y(tau, xi)`` whose thresholds are picked from grids so that
  the set has roughly a target size (:func:`find_params`). They are tried
  with plain swaps once the strict set is empty, first at a small target
  size and then, a limited number of times, at a large one.

The search stops when neither the strict nor the small relaxed set offers an
improving move and the large-space budget is spent or fails.
"""

import itertools
import logging
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .acyclicity import check_kind, h_grad
from .exceptions import CyclicProbeError, NotADagError, TooLargeError
from .graph import check_order, is_dag, reachability, swap, topological_sort
from .models import weight_matrix
from .solver import OrderSolver, solve_all_swaps

__all__ = [
    "TAU_GRID",
    "XI_GRID",
    "SearchConfig",
    "IterationRecord",
    "RunReport",
    "default_sizes",
    "acyclicity_gradient",
    "candidate_set",
    "find_params",
    "update_sort",
    "kkt_matrix",
    "kkt_flag",
    "is_connected_estimator",
    "topo_search",
    "exhaustive_oracle",
]

logger = logging.getLogger(__name__)

TAU_GRID = (0.0, 1e-8, 1e-7, 1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 1e-3)
XI_GRID = (5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 40.0)

# (d, s_small, s_large, s0) anchor points; interpolated linearly in d
_SIZE_TABLE = np.array(
    [
        [10, 30, 45, 1],
        [20, 50, 150, 1],
        [50, 100, 1000, 10],
        [100, 150, 2500, 15],
    ],
    dtype=float,
)

PROBE_STEP = 1e-8
MAX_ORACLE_D = 8


def default_sizes(d):
    """Default ``(s_small, s_large, s0)`` for dimension ``d``.

    Linear interpolation between the anchor dimensions 10, 20, 50 and 100,
    held constant outside that range.
    """
    d = float(d)
    cols = [np.interp(d, _SIZE_TABLE[:, 0], _SIZE_TABLE[:, c]) for c in (1, 2, 3)]
    s_small, s_large, s0 = (int(round(v)) for v in cols)
    return s_small, max(s_large, s_small + 1), s0


@dataclass(frozen=True)
class SearchConfig:
    """Outer-loop settings.

    ``s_small``, ``s_large`` and ``s0`` left as ``None`` are filled in from
    :func:`default_sizes` once the dimension is known. ``zero_grad_tol`` is
    the gradient size below which a coordinate counts as stationary in the
    strict candidate set; it defaults to ``kkt_tol``.

    The fixed ``tau_grid`` tops out at ``1e-3``. On dense order-constrained
    fits the acyclicity gradient of every backward pair is usually larger than
    that, so with ``adaptive_tau`` the grid is extended at each step by the
    gradient values actually present (see :func:`find_params`).
    """

    s_small: int = None
    s_large: int = None
    s0: int = None
    tau_grid: tuple = TAU_GRID
    xi_grid: tuple = XI_GRID
    adaptive_tau: bool = True
    greedy: bool = False
    h_kind: str = "poly"
    kkt_tol: float = 1e-6
    zero_grad_tol: float = None
    max_outer_iters: int = 500
    n_jobs: int = None

    def __post_init__(self):
        check_kind(self.h_kind)
        tau = tuple(sorted(float(t) for t in self.tau_grid))
        xi = tuple(sorted(float(x) for x in self.xi_grid))
        if not tau or not xi:
            raise ValueError("tau_grid and xi_grid must be non-empty")
        if tau[0] != 0.0:
            raise ValueError("tau_grid must contain 0")
        if xi[0] < 0:
            raise ValueError("xi_grid must be nonnegative")
        object.__setattr__(self, "tau_grid", tau)
        object.__setattr__(self, "xi_grid", xi)
        if self.kkt_tol <= 0:
            raise ValueError("kkt_tol must be positive")
        if self.zero_grad_tol is not None and self.zero_grad_tol < 0:
            raise ValueError("zero_grad_tol must be nonnegative")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        self._check_sizes(self.s_small, self.s_large, self.s0)

    @staticmethod
    def _check_sizes(s_small, s_large, s0):
        if s_small is not None and s_small < 1:
            raise ValueError("s_small must be >= 1")
        if s_small is not None and s_large is not None and s_large <= s_small:
            raise ValueError("s_large must exceed s_small")
        if s0 is not None and s0 < 0:
            raise ValueError("s0 must be >= 0")

    def resolved(self, d):
        """Copy with the size parameters filled in for dimension ``d``."""
        s_small, s_large, s0 = default_sizes(d)
        s_small = self.s_small if self.s_small is not None else s_small
        s_large = self.s_large if self.s_large is not None else max(s_large, s_small + 1)
        s0 = self.s0 if self.s0 is not None else s0
        zg = self.zero_grad_tol if self.zero_grad_tol is not None else self.kkt_tol
        return replace(self, s_small=s_small, s_large=s_large, s0=s0, zero_grad_tol=zg)


@dataclass
class IterationRecord:
    order: list
    score: float
    chosen_pair: tuple = None
    candidate_count: int = 0
    large_space_used: bool = False
    branch: str = "init"
    wall_time: float = 0.0
    kkt_flag: int = 0
    connected: bool = None


@dataclass
class RunReport:
    iterations: list
    final: object
    kkt_flag: int
    kkt_max_violation: float
    config: SearchConfig
    n_solves: int = 0
    large_searches: int = 0
    hard_stop: bool = False
    total_time: float = 0.0
    flags: tuple = ()

    @property
    def order(self):
        return self.final.order

    @property
    def score(self):
        return self.final.score_value

    def scores(self):
        return [r.score for r in self.iterations]

    def to_dict(self):
        cfg = asdict(self.config)
        return {
            "config": cfg,
            "iterations": [
                {**asdict(r), "chosen_pair": list(r.chosen_pair) if r.chosen_pair else None}
                for r in self.iterations
            ],
            "final_order": [int(v) for v in self.final.order],
            "final_score": float(self.final.score_value),
            "kkt_flag": int(self.kkt_flag),
            "kkt_max_violation": float(self.kkt_max_violation),
            "n_solves": int(self.n_solves),
            "large_searches": int(self.large_searches),
            "hard_stop": bool(self.hard_stop),
            "total_time": float(self.total_time),
            "flags": list(self.flags),
        }


# -- candidate sets ----------------------------------------------------------


def acyclicity_gradient(params, h_kind="poly"):
    """``grad h(W(|theta|))`` with structural zeros made exact.

    Entries are zero exactly where no walk ``j -> i`` exists in the support
    of ``params``. Walk entries keep their computed value but never drop to
    zero through round-off.
    """
    W = weight_matrix(params)
    G = np.array(h_grad(h_kind, W), dtype=float)
    walk = reachability(W).T  # walk[i, j]: some walk j -> i
    G[~walk] = 0.0
    G[walk] = np.maximum(G[walk], np.finfo(float).tiny)
    np.fill_diagonal(G, 0.0)
    return G


def _pair_matrices(params, grad, h_kind):
    Hg = acyclicity_gradient(params, h_kind)
    Gq = np.array(grad.edge_l1(), dtype=float)
    np.fill_diagonal(Gq, 0.0)
    return Hg, Gq


def _pairs(mask):
    np.fill_diagonal(mask, False)
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(mask))]


def candidate_set(params, grad, tau, xi, h_kind="poly"):
    """Pairs with ``[grad h]_ij <= tau`` and ``||dQ/dtheta_ij||_1 > xi``, sorted."""
    if tau < 0 or xi < 0:
        raise ValueError("tau and xi must be nonnegative")
    Hg, Gq = _pair_matrices(params, grad, h_kind)
    return _pairs((Hg <= tau) & (Gq > xi))


def find_params(params, grad, q, config=None, h_kind=None):
    """Grid pair ``(tau, xi)`` whose candidate set size is closest to ``q``.

    Ties go to the smallest ``tau``, then the largest ``xi``. With
    ``config.adaptive_tau`` the tau grid is extended by the distinct positive
    acyclicity-gradient values of the current point, so any target size up to
    the number of eligible pairs can be met; the fixed grid values still win
    ties.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    config = config or SearchConfig()
    Hg, Gq = _pair_matrices(params, grad, h_kind or config.h_kind)
    off = ~np.eye(Hg.shape[0], dtype=bool)
    hv, gv = Hg[off], Gq[off]
    taus = np.asarray(config.tau_grid)
    if config.adaptive_tau:
        taus = np.union1d(taus, hv[hv > 0])
    xis = np.asarray(config.xi_grid)
    by_h = np.argsort(hv, kind="stable")
    hs = hv[by_h]
    # above[x, m]: pairs among the m smallest-h ones whose gradient exceeds xis[x]
    above = np.zeros((xis.size, hs.size + 1), dtype=int)
    above[:, 1:] = np.cumsum(gv[by_h][None, :] > xis[:, None], axis=1)
    m = np.searchsorted(hs, taus, side="right")
    err = np.abs(q - above[:, m])  # (xi, tau)
    xi_idx, tau_idx = np.nonzero(err == err.min())
    t = tau_idx.min()
    x = xi_idx[tau_idx == t].max()
    return float(taus[t]), float(xis[x])


def _edge_vector(params, i, j):
    if params.kind == "linear":
        return np.array([params.theta[i, j]])
    return params.A1[j, :, i]


def update_sort(params, grad, order, pair, opt=1):
    """New order for candidate ``pair = (i, j)``.

    ``opt=1`` swaps the two nodes. ``opt=2`` nudges ``theta_ij`` a tiny step
    against its gradient and returns a topological sort of the perturbed
    support, keeping the current relative order wherever possible.
    """
    order = check_order(order)
    i, j = (int(v) for v in pair)
    if i == j:
        raise ValueError("a candidate pair needs two distinct nodes")
    if opt == 1:
        return swap(order, i, j)
    if opt != 2:
        raise ValueError("opt must be 1 or 2")
    W = np.array(weight_matrix(params), dtype=float)
    probe = _edge_vector(params, i, j) - PROBE_STEP * _edge_vector(grad, i, j)
    W[i, j] = np.abs(probe).sum()
    pos = np.empty(order.size, dtype=int)
    pos[order] = np.arange(order.size)
    try:
        return topological_sort(W, priority=pos)
    except Exception as exc:
        raise CyclicProbeError(f"probe edge {i}->{j} closes a cycle") from exc


# -- certificates ------------------------------------------------------------


def kkt_matrix(params, grad, h_kind="poly"):
    """Per-pair KKT violation.

    Where ``grad h`` vanishes the entry is the gradient L1 norm of the edge;
    elsewhere it is the edge weight, which must be zero at a KKT point.
    """
    W = weight_matrix(params)
    if not is_dag(W):
        raise NotADagError("KKT matrix is defined for DAG parameters only")
    Hg, Gq = _pair_matrices(params, grad, h_kind)
    K = np.where(Hg == 0.0, Gq, np.abs(W))
    np.fill_diagonal(K, 0.0)
    return K


def kkt_flag(K, tol=1e-6):
    """1 iff every entry of ``K`` is at most ``tol``."""
    K = np.asarray(K, dtype=float)
    return int(K.size == 0 or float(K.max()) <= tol)


def is_connected_estimator(params, order):
    """True iff the support has a directed path between every ordered pair of ``order``."""
    order = check_order(order)
    R = reachability(weight_matrix(params))
    sub = R[np.ix_(order, order)]
    return bool(np.all(sub[np.triu_indices(order.size, k=1)]))


# -- outer loop --------------------------------------------------------------


class _Search:
    def __init__(self, solver, config):
        self.solver = solver
        self.cfg = config
        self.n_solves = 0

    def improves(self, new, cur):
        return new < cur - 1e-12 * max(1.0, abs(cur))

    def evaluate(self, sol, pairs, opt):
        """Best strictly improving move among ``pairs``, or ``None``."""
        if not pairs:
            return None
        cur = sol.score_value
        update = lambda o, p: update_sort(sol.theta_star, sol.grad, o, p, opt)  # noqa: E731
        if self.cfg.greedy:
            Gq = sol.grad.edge_l1()
            ranked = sorted(pairs, key=lambda p: (-Gq[p], p))
            for p in ranked:
                (res,) = solve_all_swaps(self.solver, sol.order, [p], update=update)
                self.n_solves += 1
                if res.error is None and self.improves(res.solution.score_value, cur):
                    return res
            return None
        results = solve_all_swaps(self.solver, sol.order, pairs, update=update, n_jobs=self.cfg.n_jobs)
        self.n_solves += len(results)
        best = None
        for res in results:  # pairs are sorted, so ties keep the smallest pair
            if res.error is not None:
                logger.warning("swap %s skipped: %s", res.pair, res.error)
                continue
            if best is None or res.solution.score_value < best.solution.score_value:
                best = res
        if best is not None and self.improves(best.solution.score_value, cur):
            return best
        return None


def _record(sol, cfg, t0, **kw):
    K = kkt_matrix(sol.theta_star, sol.grad, cfg.h_kind)
    return IterationRecord(
        order=[int(v) for v in sol.order],
        score=float(sol.score_value),
        wall_time=time.perf_counter() - t0,
        kkt_flag=kkt_flag(K, cfg.kkt_tol),
        connected=is_connected_estimator(sol.theta_star, sol.order),
        **kw,
    )


def topo_search(order0, solver, config=None):
    """Run the swap search from ``order0``.

    Parameters
    ----------
    order0 : sequence of int
        Initial topological order.
    solver : OrderSolver
        Holds the data, score and model.
    config : SearchConfig, optional

    Returns
    -------
    RunReport
    """
    if not isinstance(solver, OrderSolver):
        raise TypeError("solver must be an OrderSolver")
    d = solver.d
    cfg = (config or SearchConfig()).resolved(d)
    t0 = time.perf_counter()
    search = _Search(solver, cfg)
    sol = solver.solve(check_order(order0, d))
    search.n_solves += 1
    records = [_record(sol, cfg, t0)]
    k = 0
    hard_stop = False
    while True:
        if len(records) > cfg.max_outer_iters:
            hard_stop = True
            logger.warning("outer iteration limit %d reached", cfg.max_outer_iters)
            break
        theta, grad = sol.theta_star, sol.grad
        strict = candidate_set(theta, grad, 0.0, cfg.zero_grad_tol, cfg.h_kind)
        tau_s, xi_s = find_params(theta, grad, cfg.s_small, cfg)
        small = candidate_set(theta, grad, tau_s, xi_s, cfg.h_kind)
        if not strict and not small:
            break
        if strict:
            pairs, opt, branch = strict, 2, "strict"
        else:
            pairs, opt, branch = small, 1, "small"
        move = search.evaluate(sol, pairs, opt)
        large = False
        if move is None:
            if k >= cfg.s0:
                break
            tau_l, xi_l = find_params(theta, grad, cfg.s_large, cfg)
            pairs = candidate_set(theta, grad, tau_l, xi_l, cfg.h_kind)
            move = search.evaluate(sol, pairs, 1)
            if move is None:
                break
            k += 1
            large, branch = True, "large"
        sol = move.solution
        records.append(
            _record(
                sol,
                cfg,
                t0,
                chosen_pair=move.pair,
                candidate_count=len(pairs),
                large_space_used=large,
                branch=branch,
            )
        )
        logger.info("iter %d (%s): score %.10g via %s", len(records) - 1, branch, sol.score_value, move.pair)
    K = kkt_matrix(sol.theta_star, sol.grad, cfg.h_kind)
    return RunReport(
        iterations=records,
        final=sol,
        kkt_flag=kkt_flag(K, cfg.kkt_tol),
        kkt_max_violation=float(K.max()) if K.size else 0.0,
        config=cfg,
        n_solves=search.n_solves,
        large_searches=k,
        hard_stop=hard_stop,
        total_time=time.perf_counter() - t0,
        flags=sol.flags,
    )


def exhaustive_oracle(solver):
    """Best order over all ``d!`` permutations; ties keep the lexicographically first.

    Raises
    ------
    TooLargeError
        If ``d > 8``.
    """
    d = solver.d
    if d > MAX_ORACLE_D:
        raise TooLargeError(f"exhaustive search is limited to d <= {MAX_ORACLE_D}, got {d}")
    best = None
    for perm in itertools.permutations(range(d)):
        sol = solver.solve(np.array(perm, dtype=int))
        if best is None or sol.score_value < best.score_value:
            best = sol
    return best.order, best.score_value
