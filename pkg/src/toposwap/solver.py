"""Order-constrained fitting.

Given an order, every parameter of a backward edge is pinned to zero and the
score is minimized over the remaining ones. Because all scores are sums of
per-node terms, the problem splits into one independent fit per node whose
free inputs are exactly the nodes placed before it. :class:`OrderSolver`
memoizes those node fits by predecessor set, so re-solving an order that
differs from a previous one by a swap only refits the nodes whose predecessor
set changed, and equal predecessor sets always give bit-identical fits.

Linear models with the least-squares or population score are solved in closed
form from the normal equations. All other combinations use an iterative
first-order method on the free coordinates of each node.
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize

from .exceptions import NumericalFailure
from .graph import check_order, forbidden_mask, swap
from .models import make_model
from .scores import (
    RSS_FLOOR,
    ScoreSpec,
    check_binary,
    node_loss,
    penalty,
    penalty_magnitude,
    population_covariance,
)

__all__ = [
    "SolveOptions",
    "OrderSolution",
    "SwapResult",
    "OrderSolver",
    "solve_order",
    "solve_all_swaps",
]

logger = logging.getLogger(__name__)

OPTIMIZERS = ("lbfgs", "gd", "adam")


@dataclass(frozen=True)
class SolveOptions:
    """Inner solver settings.

    ``tol`` is the sup-norm of the free-coordinate gradient at which a node fit
    counts as stationary. ``None`` picks a default per path: ``1e-6`` for the
    closed-form path (which lands at round-off anyway), ``1e-7`` for iterative
    linear fits and ``1e-8`` for MLP fits, so that per-edge gradient L1 norms
    stay below the default KKT tolerance.

    ``optimizer="lbfgs"`` runs L-BFGS and, if that stops short of ``tol``,
    finishes with at most ``polish_iters`` trust-region Newton steps on a
    finite-difference Hessian. ``"gd"`` is steepest descent with Armijo
    backtracking and ``"adam"`` uses adaptive moment steps of size
    ``learning_rate``.
    """

    tol: float = None
    max_iters: int = 10000
    optimizer: str = "lbfgs"
    learning_rate: float = 1e-2
    polish_iters: int = 200
    jitter: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass(frozen=True, eq=False)
class OrderSolution:
    order: np.ndarray
    theta_star: object
    score_value: float
    grad: object
    grad_inf_norm: float
    converged: bool
    flags: tuple = ()


@dataclass(frozen=True, eq=False)
class SwapResult:
    pair: tuple
    order: np.ndarray = None
    solution: OrderSolution = None
    error: Exception = None


@dataclass(eq=False)
class _NodeFit:
    block: tuple
    value: float
    grad: tuple
    free_grad_inf: float
    converged: bool
    flags: tuple = field(default_factory=tuple)


class OrderSolver:
    """Solve the order-constrained problem for many orders on one dataset.

    Parameters
    ----------
    score : ScoreSpec or str
    X : array of shape (n, d), optional
        Data matrix; not needed for the population score.
    model : {"linear", "mlp"}
    hidden_units : int
        Hidden width of the MLP model.
    options : SolveOptions, optional
    """

    def __init__(self, score, X=None, model="linear", hidden_units=30, options=None):
        if isinstance(score, str):
            score = ScoreSpec(score)
        self.score = score
        self.model = make_model(model, hidden_units)
        self.options = options or SolveOptions()
        if score.kind == "population":
            if self.model.kind != "linear":
                raise ValueError("population score requires the linear model")
            self.gram = population_covariance(score.population_truth)
            self.scale = 1.0
            self.X = None
            self.d = self.gram.shape[0]
        else:
            if X is None:
                raise ValueError(f"score {score.kind!r} requires a data matrix")
            X = np.asarray(X, dtype=float)
            if X.ndim != 2 or X.shape[0] < 1:
                raise ValueError("X must be a non-empty 2-D array")
            if score.kind == "logistic":
                check_binary(X)
            self.X = X
            self.d = X.shape[1]
            self.gram = None
            if score.kind == "ls" and self.model.kind == "linear":
                self.gram = X.T @ X / X.shape[0]
                self.scale = 0.5
        self.exact = self.gram is not None
        tol = self.options.tol
        if tol is None:
            tol = 1e-6 if self.exact else (1e-7 if self.model.kind == "linear" else 1e-8)
        self.tol = tol
        self._cache = {}

    # -- node fits -----------------------------------------------------------

    def node_fit(self, j, free, warm=None):
        """Fit node ``j`` using only inputs ``free`` (sorted node indices)."""
        free = tuple(sorted(int(i) for i in free))
        if j in free:
            raise ValueError("a node cannot be its own input")
        if warm is None:
            key = (j, free)
            fit = self._cache.get(key)
            if fit is None:
                fit = self._fit(j, np.array(free, dtype=int), None)
                self._cache[key] = fit
            return fit
        return self._fit(j, np.array(free, dtype=int), warm)

    def _fit(self, j, free, warm):
        if self.exact:
            return self._fit_quadratic(j, free)
        return self._fit_iterative(j, free, warm)

    def _fit_quadratic(self, j, free):
        G, c = self.gram, self.scale
        d = self.d
        w = np.zeros(d)
        flags = ()
        if free.size:
            A = G[np.ix_(free, free)]
            b = G[free, j]
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", linalg.LinAlgWarning)
                    w[free] = linalg.solve(A, b, assume_a="pos", check_finite=False)
            except (linalg.LinAlgError, linalg.LinAlgWarning, ValueError):
                jit = self.options.jitter * max(np.trace(A), 1.0)
                try:
                    w[free] = linalg.solve(A + jit * np.eye(free.size), b, assume_a="pos")
                except linalg.LinAlgError as exc:
                    raise NumericalFailure(f"normal equations for node {j} are singular") from exc
                flags = ("jitter",)
                logger.debug("node %d: rank-deficient Gram block, jitter applied", j)
        Gw = G @ w
        value = c * (G[j, j] - 2.0 * w @ G[:, j] + w @ Gw)
        grad = 2.0 * c * (Gw - G[:, j])
        grad[j] = 0.0
        free_inf = float(np.max(np.abs(grad[free]))) if free.size else 0.0
        return _NodeFit((w,), float(value), (grad,), free_inf, free_inf <= self.tol, flags)

    def _node_objective(self, j, free, spec=None):
        model, X, d = self.model, self.X, self.d
        spec = spec or self.score
        x = X[:, j]

        lam = spec.l2_lambda

        def full(p):
            f = model.node_predict(p, X, free)
            v, df = node_loss(spec, x, f)
            g = model.node_backward(p, X, df, free)
            pv, pg = penalty(spec, model.node_edges(p))
            g = (g[0] + pg,) + tuple(g[1:])
            v += pv
            if lam > 0:
                v += 0.5 * lam * sum(np.sum(a**2) for a in p)
                g = tuple(ga + lam * a for ga, a in zip(g, p))
            return v, g, f

        def fun(vec):
            p = model.unpack(vec, free, d)
            v, g, _ = full(p)
            return v, model.pack_grad(g, free)

        return full, fun

    def _fit_iterative(self, j, free, warm):
        model, d = self.model, self.d
        if warm is not None:
            start = tuple(np.array(a, dtype=float) for a in warm)
        else:
            rng = np.random.default_rng(np.random.SeedSequence(self.options.seed, spawn_key=(j,)))
            start = model.node_init(d, j, rng)
        x0 = model.pack(start, free)
        full, fun = self._node_objective(j, free)
        split_inf = None
        if not x0.size:
            vec = x0
        elif self.score.nonsmooth and self.options.optimizer == "lbfgs":
            n_edge = free.size * (model.hidden_units if model.kind == "mlp" else 1)
            vec, split_inf = self._minimize_split(j, free, x0, n_edge)
        else:
            vec = _minimize(fun, x0, self.tol, self.options)
        block = model.unpack(vec, free, d)
        value, grad, f = full(block)
        grad[0][..., j] = 0.0
        free_grad = model.pack_grad(grad, free)
        free_inf = float(np.max(np.abs(free_grad))) if free_grad.size else 0.0
        if split_inf is not None:
            free_inf = split_inf
        flags = ()
        if self.score.kind == "nll-mcp":
            r = self.X[:, j] - f
            if r @ r < RSS_FLOOR:
                flags = ("rss_floor",)
        return _NodeFit(block, float(value), grad, free_inf, free_inf <= self.tol, flags)

    def _minimize_split(self, j, free, x0, n_edge, restarts=3):
        """Minimize with edge parameters split as ``u - v``, ``u, v >= 0``.

        The sparsity penalty then acts on ``u + v`` and is differentiable, so
        bounded L-BFGS applies and inactive edges land on exact zeros. Returns
        the packed parameters and the sup-norm of the projected gradient.
        """
        spec = self.score
        smooth = replace(spec, mcp_lambda=0.0, l1_lambda=0.0)
        _, fun = self._node_objective(j, free, smooth)
        ne = n_edge

        def fun_z(z):
            u, v = z[:ne], z[ne : 2 * ne]
            val, g = fun(np.concatenate([u - v, z[2 * ne :]]))
            pv, pd = penalty_magnitude(spec, u + v)
            return val + pv, np.concatenate([g[:ne] + pd, pd - g[:ne], g[ne:]])

        def projected(z):
            g = fun_z(z)[1]
            g[: 2 * ne] = np.where(z[: 2 * ne] > 0, g[: 2 * ne], np.minimum(g[: 2 * ne], 0.0))
            return float(np.max(np.abs(g)))

        e = x0[:ne]
        z = np.concatenate([np.maximum(e, 0.0), np.maximum(-e, 0.0), x0[ne:]])
        bounds = [(0.0, None)] * (2 * ne) + [(None, None)] * (z.size - 2 * ne)
        opts = {"maxiter": self.options.max_iters, "gtol": self.tol, "ftol": 0.0, "maxcor": 20}
        pg = projected(z)
        for _ in range(restarts):
            if pg <= self.tol:
                break
            z = optimize.minimize(fun_z, z, jac=True, method="L-BFGS-B", bounds=bounds, options=opts).x
            pg = projected(z)
        u, v = z[:ne], z[ne : 2 * ne]
        return np.concatenate([u - v, z[2 * ne :]]), pg

    # -- whole orders ----------------------------------------------------------

    def solve(self, order, warm_start=None):
        """Order-constrained optimum for ``order``; returns an :class:`OrderSolution`."""
        order = check_order(order, self.d)
        fits = []
        for pos, j in enumerate(order):
            warm = None
            if warm_start is not None and not self.exact:
                warm = self.model.node_block(warm_start, j)
                # backward edges of the new order start at zero
                self.model.node_edges(warm)[..., order[pos:]] = 0.0
            fits.append((j, self.node_fit(int(j), order[:pos], warm)))
        fits.sort(key=lambda t: t[0])
        model = self.model
        theta = model.stack([f.block for _, f in fits])
        grad = model.stack([f.grad for _, f in fits])
        value = float(sum(f.value for _, f in fits))
        flags = tuple(sorted({fl for _, f in fits for fl in f.flags}))
        converged = all(f.converged for _, f in fits)
        if not converged:
            flags = flags + ("not_converged",)
        inf = max(f.free_grad_inf for _, f in fits)
        return OrderSolution(order, theta, value, grad, inf, converged, flags)

    def cache_size(self):
        return len(self._cache)


def solve_order(order, score, X=None, model="linear", options=None, warm_start=None, hidden_units=30):
    """Solve the order-constrained problem for a single order.

    The backward parameters ``theta[order[p], order[q]]`` for ``q < p`` of the
    result are exactly zero.
    """
    solver = OrderSolver(score, X, model=model, hidden_units=hidden_units, options=options)
    return solver.solve(order, warm_start=warm_start)


def solve_all_swaps(solver, order, pairs, update=None, n_jobs=None):
    """Solve the order obtained from each candidate pair.

    ``update(order, pair)`` maps a pair to a new order and defaults to swapping
    the two nodes. A failure on one pair is recorded in its :class:`SwapResult`
    and does not abort the batch. Results come back in the order of ``pairs``,
    whether or not they were computed in parallel.
    """
    if update is None:
        update = lambda o, p: swap(o, *p)  # noqa: E731

    def one(pair):
        try:
            new = update(order, pair)
            return SwapResult(tuple(pair), new, solver.solve(new))
        except Exception as exc:  # recorded per pair, the batch carries on
            logger.debug("swap %s failed: %s", pair, exc)
            return SwapResult(tuple(pair), error=exc)

    pairs = [tuple(int(v) for v in p) for p in pairs]
    if n_jobs and n_jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(one, pairs))
    return [one(p) for p in pairs]


def _fd_hessian(fun, x, h=1e-6):
    """Symmetrized central differences of the analytic gradient."""
    k = x.size
    H = np.empty((k, k))
    e = np.zeros(k)
    for i in range(k):
        e[i] = h
        H[:, i] = (fun(x + e)[1] - fun(x - e)[1]) / (2 * h)
        e[i] = 0.0
    return 0.5 * (H + H.T)


def _minimize(fun, x0, tol, options):
    if options.optimizer == "lbfgs":
        res = optimize.minimize(
            fun,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": options.max_iters, "gtol": tol, "ftol": 0.0, "maxcor": 20},
        )
        x, gn = res.x, np.max(np.abs(fun(res.x)[1]))
        if gn > tol and options.polish_iters > 0:
            # trust-region Newton finish; L-BFGS crawls on flat nonconvex valleys
            res2 = optimize.minimize(
                fun,
                x,
                jac=True,
                hess=lambda v: _fd_hessian(fun, v),
                method="trust-exact",
                options={"gtol": tol, "maxiter": options.polish_iters},
            )
            if np.max(np.abs(fun(res2.x)[1])) < gn:
                x = res2.x
        return x
    if options.optimizer == "gd":
        return _gradient_descent(fun, x0, tol, options.max_iters)
    return _adam(fun, x0, tol, options.max_iters, options.learning_rate)


def _gradient_descent(fun, x, tol, max_iters, c=1e-4):
    """Steepest descent with Armijo backtracking (step halving)."""
    v, g = fun(x)
    step = 1.0
    for _ in range(max_iters):
        if np.max(np.abs(g)) <= tol:
            break
        gg = g @ g
        while True:
            x_new = x - step * g
            v_new, g_new = fun(x_new)
            if v_new <= v - c * step * gg or step < 1e-20:
                break
            step *= 0.5
        x, v, g = x_new, v_new, g_new
        step *= 2.0
    return x


def _adam(fun, x, tol, max_iters, lr, b1=0.9, b2=0.999, eps=1e-12):
    m = np.zeros_like(x)
    s = np.zeros_like(x)
    best_x, best_g = x, np.inf
    for t in range(1, max_iters + 1):
        _, g = fun(x)
        gn = np.max(np.abs(g))
        if gn < best_g:
            best_x, best_g = x.copy(), gn
        if gn <= tol:
            break
        m = b1 * m + (1 - b1) * g
        s = b2 * s + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1**t)) / (np.sqrt(s / (1 - b2**t)) + eps)
    return best_x
