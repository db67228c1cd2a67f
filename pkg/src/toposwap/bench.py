"""Batch runs over seeds and sizes with per-row metrics and a summary table."""

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .datagen import GRAPH_KINDS, NOISE_KINDS, make_instance
from .estimator import TopoDAG
from .graph import shd

__all__ = ["BenchConfig", "BenchRow", "run_bench", "run_row", "summarize", "write_rows", "write_summary"]

logger = logging.getLogger(__name__)

ROW_FIELDS = ("method", "d", "seed", "loss", "shd", "kkt_flag", "wall_time_seconds", "error")
SUMMARY_FIELDS = (
    "method",
    "d",
    "m",
    "failed",
    "loss_mean",
    "loss_se",
    "shd_mean",
    "shd_se",
    "kkt_rate",
    "time_mean",
    "time_se",
)


@dataclass
class BenchConfig:
    """One batch: every ``d`` in ``d_list`` crossed with every seed.

    ``estimator`` holds keyword arguments for :class:`TopoDAG`; ``init`` may
    be ``"random"`` or a weight matrix used as a warm start for every row.
    """

    graph: str = "er"
    k: int = 1
    noise: str = "gauss-ev"
    n: int = 1000
    d_list: tuple = (10,)
    seeds: tuple = (0,)
    hidden_units: int = 30
    threshold: float = 0.3
    method: str = None
    estimator: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.graph not in GRAPH_KINDS:
            raise ValueError(f"unknown graph kind {self.graph!r}")
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise!r}")
        self.seeds = tuple(int(s) for s in self.seeds)
        self.d_list = tuple(int(d) for d in self.d_list)
        if not self.seeds:
            raise ValueError("seed list is empty")
        if not self.d_list:
            raise ValueError("d list is empty")
        if self.method is None:
            init = self.estimator.get("init", "random")
            prefix = "Random" if isinstance(init, str) else "Warm"
            suffix = "-greedy" if self.estimator.get("greedy") else ""
            self.method = f"{prefix}-TOPO{suffix}"


@dataclass
class BenchRow:
    method: str
    d: int
    seed: int
    loss: float = math.nan
    shd: int = -1
    kkt_flag: int = 0
    wall_time_seconds: float = math.nan
    error: str = ""
    W: np.ndarray = field(default=None, repr=False)


def _estimator_kwargs(cfg, inst):
    kw = dict(cfg.estimator)
    kw.setdefault("threshold", cfg.threshold)
    kw.setdefault("hidden_units", cfg.hidden_units)
    if cfg.noise == "mlp":
        kw.setdefault("model", "mlp")
    elif cfg.noise == "logistic":
        kw.setdefault("score", "logistic")
    if kw.get("score") == "population":
        kw["population_truth"] = inst.W
    kw.setdefault("random_state", inst.seed)
    return kw


def run_row(cfg, d, seed):
    """Generate one instance and learn it; failures are captured in ``error``."""
    row = BenchRow(cfg.method, int(d), int(seed))
    t0 = time.perf_counter()
    try:
        inst = make_instance(cfg.graph, d, cfg.k, cfg.n, cfg.noise, seed, cfg.hidden_units)
        est = TopoDAG(**_estimator_kwargs(cfg, inst)).fit(inst.X)
        row.loss = est.score_value_
        row.kkt_flag = est.kkt_flag_
        row.shd = shd(est.adjacency_, inst.B)
        row.W = est.W_
    except Exception as exc:  # recorded, batch continues
        logger.exception("row d=%s seed=%s failed", d, seed)
        row.error = f"{type(exc).__name__}: {exc}"
    row.wall_time_seconds = time.perf_counter() - t0
    return row


def _run_row_args(args):
    return run_row(*args)


def run_bench(cfg, n_jobs=None):
    """All rows of ``cfg``, ordered by ``(d, seed)`` whatever the completion order."""
    jobs = sorted((d, s) for d in cfg.d_list for s in cfg.seeds)
    if n_jobs is None or n_jobs <= 1 or len(jobs) == 1:
        rows = [run_row(cfg, d, s) for d, s in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_run_row_args, [(cfg, d, s) for d, s in jobs]))
    return rows


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    m = v.size
    if m == 0:
        return math.nan, math.nan
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(m)) if m >= 2 else math.nan
    return mean, se


def summarize(rows):
    """Mean and standard error ``s / sqrt(m)`` per ``(method, d)`` over successful rows."""
    groups = {}
    for r in rows:
        groups.setdefault((r.method, r.d), []).append(r)
    out = []
    for (method, d), rs in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        ok = [r for r in rs if not r.error]
        loss = _mean_se([r.loss for r in ok])
        sh = _mean_se([r.shd for r in ok])
        tm = _mean_se([r.wall_time_seconds for r in ok])
        out.append(
            {
                "method": method,
                "d": d,
                "m": len(ok),
                "failed": len(rs) - len(ok),
                "loss_mean": loss[0],
                "loss_se": loss[1],
                "shd_mean": sh[0],
                "shd_se": sh[1],
                "kkt_rate": float(np.mean([r.kkt_flag for r in ok])) if ok else math.nan,
                "time_mean": tm[0],
                "time_se": tm[1],
            }
        )
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path, header, records):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in records:
            w.writerow([_fmt(rec[h]) for h in header])


def write_rows(path, rows):
    _write(path, ROW_FIELDS, [{f.name: getattr(r, f.name) for f in fields(r)} for r in rows])


def write_summary(path, summary):
    _write(path, SUMMARY_FIELDS, summary)


def config_dict(cfg):
    doc = asdict(cfg)
    init = doc["estimator"].get("init")
    if init is not None and not isinstance(init, str):
        doc["estimator"]["init"] = np.asarray(init).tolist()
    return doc
