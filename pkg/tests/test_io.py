import numpy as np
import pytest

from toposwap.io import load_json, load_matrix, load_mlp, save_json, save_matrix, save_mlp
from toposwap.models import MLPParams


def test_matrix_round_trip_is_exact(tmp_path):
    M = np.random.default_rng(0).standard_normal((5, 5)) / 3
    save_matrix(tmp_path / "m.csv", M)
    assert np.array_equal(load_matrix(tmp_path / "m.csv"), M)


def test_single_row(tmp_path):
    save_matrix(tmp_path / "r.csv", np.array([1.0, 2.0]))
    assert load_matrix(tmp_path / "r.csv").shape == (1, 2)


@pytest.mark.parametrize("text", ["1,2\n3\n", "1,abc\n", "1,nan\n", ""])
def test_malformed_matrix(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        load_matrix(p)


def test_mlp_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    p = MLPParams(rng.standard_normal((3, 2, 3)), rng.standard_normal((3, 2)))
    save_mlp(tmp_path / "p.json", p)
    q = load_mlp(tmp_path / "p.json")
    assert np.array_equal(p.A1, q.A1) and np.array_equal(p.A2, q.A2)


def test_malformed_mlp(tmp_path):
    save_json(tmp_path / "p.json", {"d": 2, "m1": 3, "nodes": []})
    with pytest.raises(ValueError):
        load_mlp(tmp_path / "p.json")


def test_bad_json(tmp_path):
    (tmp_path / "x.json").write_text("{")
    with pytest.raises(ValueError):
        load_json(tmp_path / "x.json")
