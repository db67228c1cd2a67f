"""Command-line front end.

Subcommands ``generate``, ``learn``, ``eval``, ``bench`` and ``kkt-check``.
Every option can also come from a JSON file passed with ``--config``; keys are
option names with or without leading dashes (``"s-small"`` or ``"s_small"``)
and explicit flags override the file.

Exit codes: 0 on success (for ``learn`` and ``kkt-check``: KKT certified),
1 when the result is not KKT certified, 2 on usage, input or solver errors.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .acyclicity import KINDS as H_KINDS
from .bench import BenchConfig, config_dict, run_bench, summarize, write_rows, write_summary
from .datagen import GRAPH_KINDS, NOISE_KINDS, make_instance
from .estimator import TopoDAG
from .graph import shd, threshold
from .io import load_json, load_matrix, load_mlp, save_json, save_matrix, save_mlp
from .models import LinearParams, MLPParams, weight_matrix
from .scores import SCORE_KINDS, evaluate
from .search import kkt_flag, kkt_matrix

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_NOT_KKT, EXIT_ERROR = 0, 1, 2

logger = logging.getLogger("toposwap")


# -- parser ------------------------------------------------------------------


def _add_generation(p, multi_d=False):
    g = p.add_argument_group("instance")
    g.add_argument("--graph", choices=GRAPH_KINDS, default="er")
    g.add_argument("--k", type=int, default=1, help="expected edges per node")
    if multi_d:
        g.add_argument("--d", type=int, nargs="+", default=[10], help="one or more graph sizes")
    else:
        g.add_argument("--d", type=int, default=10)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--noise", choices=NOISE_KINDS, default="gauss-ev")


def _add_scoring(p):
    g = p.add_argument_group("score")
    g.add_argument("--score", choices=SCORE_KINDS, default=None, help="default: ls (logistic for binary SEMs)")
    g.add_argument("--model", choices=("linear", "mlp"), default=None)
    g.add_argument("--h", dest="h_kind", choices=H_KINDS, default="poly")
    g.add_argument("--truth", default=None, help="true weight CSV for --score population")
    g.add_argument("--l2", dest="l2_lambda", type=float, default=None)
    g.add_argument("--mcp-lambda", type=float, default=0.005)
    g.add_argument("--mcp-beta", type=float, default=10.0)
    g.add_argument("--l1-lambda", type=float, default=0.01)
    g.add_argument("--kkt-tol", type=float, default=1e-6)


def _add_search(p):
    g = p.add_argument_group("search")
    g.add_argument("--s-small", type=int, default=None)
    g.add_argument("--s-large", type=int, default=None)
    g.add_argument("--s0", type=int, default=None)
    g.add_argument("--greedy", action="store_true", default=False)
    g.add_argument("--init", default="random", help="'random' or a weight CSV whose topological sort starts the search")
    g.add_argument("--threshold", type=float, default=0.3)
    g.add_argument("--tol", type=float, default=None)
    g.add_argument("--max-iters", type=int, default=10000)
    g.add_argument("--optimizer", choices=("lbfgs", "gd", "adam"), default="lbfgs")
    g.add_argument("--max-outer-iters", type=int, default=500)
    g.add_argument("--jobs", type=int, default=None, help="worker count")


def build_parser():
    parser = argparse.ArgumentParser(prog="toposwap", description="DAG learning by KKT-guided topological swaps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON file with option defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--hidden-units", type=int, default=30)
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="sample a random SEM instance")
    _add_generation(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("learn", parents=[common], help="run the search on a data CSV")
    p.add_argument("data", nargs="?", help="n x d data CSV (omit for --score population)")
    _add_scoring(p)
    _add_search(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", parents=[common], help="compare an estimate with the truth")
    p.add_argument("estimate", help="weight CSV or MLP JSON")
    p.add_argument("truth_file", metavar="truth", help="weight CSV or MLP JSON")
    p.add_argument("--data", default=None, help="data CSV; adds the loss and KKT details")
    p.add_argument("--threshold", type=float, default=0.3)
    _add_scoring(p)

    p = sub.add_parser("bench", parents=[common], help="batch over sizes and seeds")
    _add_generation(p, multi_d=True)
    p.add_argument("--seeds", type=int, nargs="*", default=None, help="explicit instance seeds")
    p.add_argument("--n-seeds", type=int, default=10, help="seeds --seed .. --seed + n-seeds - 1")
    p.add_argument("--method", default=None, help="label for the rows")
    p.add_argument("--save-weights", action="store_true", default=False)
    _add_scoring(p)
    _add_search(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("kkt-check", parents=[common], help="certify a saved solution")
    p.add_argument("params", help="weight CSV or MLP JSON")
    p.add_argument("data", nargs="?")
    _add_scoring(p)
    return parser, sub


def _apply_config(parser, sub, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    doc = load_json(args.config)
    if not isinstance(doc, dict):
        raise ValueError(f"{args.config}: config must be a JSON object")
    subparser = sub.choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    flags = {s.lstrip("-").replace("-", "_"): a.dest for a in subparser._actions for s in a.option_strings}
    defaults = {}
    for key, value in doc.items():
        name = key.lstrip("-").replace("-", "_")
        dest = flags.get(name, name)
        if dest not in known or dest in ("help", "config"):
            raise ValueError(f"{args.config}: unknown option {key!r}")
        defaults[dest] = value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- helpers -----------------------------------------------------------------


def _load_params(path):
    if str(path).endswith(".json"):
        return load_mlp(path)
    return LinearParams(load_matrix(path))


def _load_data(path):
    if path is None:
        return None
    return load_matrix(path)


def _estimator(args, X=None):
    init = args.init
    if init != "random":
        init = load_matrix(init)
    truth = load_matrix(args.truth) if args.truth else None
    score = args.score
    if score is None:
        score = "population" if truth is not None and X is None else "ls"
    return TopoDAG(
        score=score,
        model=args.model or "linear",
        h_kind=args.h_kind,
        hidden_units=args.hidden_units,
        s_small=args.s_small,
        s_large=args.s_large,
        s0=args.s0,
        greedy=args.greedy,
        init=init,
        threshold=args.threshold,
        kkt_tol=args.kkt_tol,
        tol=args.tol,
        max_iters=args.max_iters,
        optimizer=args.optimizer,
        l2_lambda=args.l2_lambda,
        mcp_lambda=args.mcp_lambda,
        mcp_beta=args.mcp_beta,
        l1_lambda=args.l1_lambda,
        population_truth=truth,
        max_outer_iters=args.max_outer_iters,
        n_jobs=args.jobs,
        random_state=args.seed,
    )


def _score_spec(args, params, X):
    model = args.model or ("mlp" if isinstance(params, MLPParams) else "linear")
    truth = load_matrix(args.truth) if args.truth else None
    score = args.score or ("population" if truth is not None and X is None else "ls")
    est = TopoDAG(
        score=score,
        model=model,
        l2_lambda=args.l2_lambda,
        mcp_lambda=args.mcp_lambda,
        mcp_beta=args.mcp_beta,
        l1_lambda=args.l1_lambda,
        population_truth=truth,
    )
    return est._score_spec()


def certify(spec, params, X, h_kind="poly", tol=1e-6):
    """Score value, KKT flag and largest KKT violation of ``params``."""
    ev = evaluate(spec, params, X)
    K = kkt_matrix(params, ev.grad, h_kind)
    return ev.value, kkt_flag(K, tol), float(K.max()) if K.size else 0.0


def _print(doc):
    print(json.dumps(doc, indent=2, sort_keys=True))


# -- commands ----------------------------------------------------------------


def cmd_generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inst = make_instance(args.graph, args.d, args.k, args.n, args.noise, args.seed, args.hidden_units)
    if args.noise == "mlp":
        truth_name = "truth.json"
        save_mlp(out / truth_name, inst.truth)
    else:
        truth_name = "truth.csv"
        save_matrix(out / truth_name, inst.truth)
    save_matrix(out / "data.csv", inst.X)
    manifest = {
        "spec": {k: v for k, v in inst.meta.items() if k not in ("noise", "n", "seed")},
        "noise": args.noise,
        "n": args.n,
        "seed": args.seed,
        "rng": "numpy PCG64 via SeedSequence(seed).spawn(3): graph, weights, samples",
        "files": {"truth": truth_name, "data": "data.csv"},
        "version": __version__,
    }
    save_json(out / "manifest.json", manifest)
    print(out)
    return EXIT_OK


def cmd_learn(args):
    X = _load_data(args.data)
    est = _estimator(args, X)
    if X is None and est.score != "population":
        raise ValueError("learn needs a data file unless --score population is used")
    est.fit(X)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(out / "W.csv", est.W_)
    save_matrix(out / "adjacency.csv", est.adjacency_)
    if est.params_.kind == "mlp":
        save_mlp(out / "params.json", est.params_)
    doc = est.report_.to_dict()
    doc.update(
        {
            "data": args.data,
            "seed": args.seed,
            "score": est.score,
            "model": est.model,
            "threshold": args.threshold,
            "init": args.init,
            "version": __version__,
        }
    )
    save_json(out / "report.json", doc)
    print(f"score {est.score_value_:.10g} kkt_flag {est.kkt_flag_} iterations {len(est.report_.iterations) - 1}")
    return EXIT_OK if est.kkt_flag_ == 1 else EXIT_NOT_KKT


def cmd_eval(args):
    est = _load_params(args.estimate)
    truth = _load_params(args.truth_file)
    West, Wtrue = weight_matrix(est), weight_matrix(truth)
    if West.shape != Wtrue.shape:
        raise ValueError(f"dimension mismatch: estimate {West.shape} vs truth {Wtrue.shape}")
    A = threshold(West, args.threshold)
    T = threshold(Wtrue, 0.0)
    doc = {
        "d": int(West.shape[0]),
        "shd": shd(A, T),
        "edges_estimated": int(A.sum()),
        "edges_true": int(T.sum()),
        "threshold": args.threshold,
    }
    if args.data:
        X = load_matrix(args.data)
        if X.shape[1] != West.shape[0]:
            raise ValueError(f"dimension mismatch: data has {X.shape[1]} columns, estimate is {West.shape}")
        spec = _score_spec(args, est, X)
        doc["loss"], doc["kkt_flag"], doc["kkt_max_violation"] = certify(spec, est, X, args.h_kind, args.kkt_tol)
    _print(doc)
    return EXIT_OK


def cmd_kkt_check(args):
    params = _load_params(args.params)
    X = _load_data(args.data)
    spec = _score_spec(args, params, X)
    if X is None and spec.kind != "population":
        raise ValueError("kkt-check needs a data file unless --score population is used")
    value, flag, worst = certify(spec, params, X, args.h_kind, args.kkt_tol)
    _print({"score": value, "kkt_flag": flag, "kkt_max_violation": worst, "tol": args.kkt_tol})
    return EXIT_OK if flag == 1 else EXIT_NOT_KKT


def cmd_bench(args):
    if args.seeds is not None:
        seeds = args.seeds
    else:
        if args.n_seeds < 0:
            raise ValueError("--n-seeds must be nonnegative")
        seeds = list(range(args.seed, args.seed + args.n_seeds))
    init = args.init if args.init == "random" else load_matrix(args.init)
    est_kw = {
        "model": args.model,
        "score": args.score,
        "h_kind": args.h_kind,
        "s_small": args.s_small,
        "s_large": args.s_large,
        "s0": args.s0,
        "greedy": args.greedy,
        "init": init,
        "kkt_tol": args.kkt_tol,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "optimizer": args.optimizer,
        "l2_lambda": args.l2_lambda,
        "mcp_lambda": args.mcp_lambda,
        "mcp_beta": args.mcp_beta,
        "l1_lambda": args.l1_lambda,
        "max_outer_iters": args.max_outer_iters,
    }
    est_kw = {k: v for k, v in est_kw.items() if v is not None}
    cfg = BenchConfig(
        graph=args.graph,
        k=args.k,
        noise=args.noise,
        n=args.n,
        d_list=args.d,
        seeds=seeds,
        hidden_units=args.hidden_units,
        threshold=args.threshold,
        method=args.method,
        estimator=est_kw,
    )
    rows = run_bench(cfg, n_jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "rows.csv", rows)
    summary = summarize(rows)
    write_summary(out / "summary.csv", summary)
    save_json(out / "config.json", {**config_dict(cfg), "version": __version__})
    if args.save_weights:
        for r in rows:
            if r.W is not None:
                save_matrix(out / f"W_d{r.d}_seed{r.seed}.csv", r.W)
    for s in summary:
        print(
            f"{s['method']} d={s['d']} m={s['m']} failed={s['failed']} "
            f"loss {s['loss_mean']:.4g} +- {s['loss_se']:.2g} shd {s['shd_mean']:.3g} +- {s['shd_se']:.2g} "
            f"kkt {s['kkt_rate']:.2f} time {s['time_mean']:.3g}s"
        )
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "learn": cmd_learn,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "kkt-check": cmd_kkt_check,
}


def main(argv=None):
    parser, sub = build_parser()
    try:
        args = _apply_config(parser, sub, argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    except (OSError, ValueError) as exc:
        print(f"toposwap: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        logger.debug("command failed", exc_info=True)
        print(f"toposwap: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
