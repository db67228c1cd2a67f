import csv
import statistics

import numpy as np
import pytest

from toposwap.bench import BenchConfig, BenchRow, run_bench, summarize, write_rows, write_summary
from toposwap.cli import certify
from toposwap.datagen import make_instance
from toposwap.models import LinearParams
from toposwap.scores import ScoreSpec


def test_empty_seed_list():
    with pytest.raises(ValueError):
        BenchConfig(seeds=())


def test_method_labels():
    assert BenchConfig().method == "Random-TOPO"
    assert BenchConfig(estimator={"init": np.zeros((2, 2)), "greedy": True}).method == "Warm-TOPO-greedy"


def test_single_seed_single_row():
    rows = run_bench(BenchConfig(d_list=(5,), seeds=(0,), n=200))
    assert len(rows) == 1 and not rows[0].error
    (s,) = summarize(rows)
    assert s["m"] == 1 and np.isnan(s["loss_se"])


def test_summary_matches_statistics():
    loss = [1.0, 2.5, 3.25, 4.0]
    rows = [BenchRow("m", 5, i, loss=v, shd=i, kkt_flag=1, wall_time_seconds=0.1 * i) for i, v in enumerate(loss)]
    rows.append(BenchRow("m", 5, 9, error="boom"))
    (s,) = summarize(rows)
    assert s["m"] == 4 and s["failed"] == 1
    assert s["loss_mean"] == pytest.approx(statistics.mean(loss), abs=1e-12)
    assert s["loss_se"] == pytest.approx(statistics.stdev(loss) / 2, abs=1e-12)
    assert s["shd_mean"] == pytest.approx(1.5, abs=1e-12)


def test_failures_are_recorded():
    rows = run_bench(BenchConfig(d_list=(4,), seeds=(0,), estimator={"score": "nll-mcp", "mcp_beta": -1.0}))
    assert rows[0].error and np.isnan(rows[0].loss)


def test_parallel_rows_ordered():
    cfg = BenchConfig(d_list=(5, 4), seeds=(2, 1), n=200)
    rows = run_bench(cfg, n_jobs=2)
    assert [(r.d, r.seed) for r in rows] == [(4, 1), (4, 2), (5, 1), (5, 2)]


def test_saved_weights_recertify(tmp_path):
    cfg = BenchConfig(d_list=(5,), seeds=(3,), n=300)
    (row,) = run_bench(cfg)
    write_rows(tmp_path / "rows.csv", [row])
    write_summary(tmp_path / "summary.csv", summarize([row]))
    with open(tmp_path / "rows.csv") as fh:
        rec = next(csv.DictReader(fh))
    inst = make_instance("er", 5, 1, 300, "gauss-ev", 3)
    value, flag, _ = certify(ScoreSpec("ls"), LinearParams(row.W), inst.X)
    assert flag == row.kkt_flag == int(rec["kkt_flag"]) == 1
    assert value == pytest.approx(float(rec["loss"]), rel=1e-12)
