import csv
import json

import numpy as np
import pytest

from metadist.bench.data import sample_dataset, write_dataset
from metadist.bench.variants import build_variant, example_domain
from metadist.cli import EXIT_FAIL, EXIT_INPUT, EXIT_INVALID, EXIT_OK, EXIT_USAGE, main


def _write_json(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


@pytest.fixture
def mlp_spec(tmp_path):
    return _write_json(tmp_path / "mlp.json", example_domain("mlp").to_dict())


@pytest.fixture
def v3(tmp_path):
    g = build_variant(3)
    spec = _write_json(tmp_path / "v3.json", g.to_dict())
    data = tmp_path / "v3.csv"
    ds = sample_dataset(3, "VS", "MLP", 0)
    write_dataset(ds, data)
    return g, spec, str(data), len(ds)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_validate_good(mlp_spec, capsys):
    assert main(["validate", mlp_spec]) == EXIT_OK
    assert capsys.readouterr().out == ""


def test_validate_cycle(tmp_path, capsys):
    d = example_domain("mlp").to_dict()
    d["arcs"].append({"parent": "u1", "child": "o", "kind": "values"})
    spec = _write_json(tmp_path / "cyc.json", d)
    code = main(["validate", spec])
    out = capsys.readouterr().out
    assert code == EXIT_INVALID
    assert "cycle" in out.lower()
    assert "u1" in out and "o" in out


def test_usage_and_input_errors(tmp_path, mlp_spec):
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["validate", str(tmp_path / "missing.json")]) == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["validate", str(bad)]) == EXIT_INPUT


def test_distance_matrix(tmp_path, v3):
    g, spec, data, n = v3
    cfg = _write_json(tmp_path / "cfg.json", {})
    out = tmp_path / "d.csv"
    for approach in ("meta", "hybrid"):
        target = tmp_path / f"d_{approach}.csv"
        assert main(["distance", spec, cfg, data, "--approach", approach, "--out", str(target)]) == EXIT_OK
        D = np.array(_read_csv(target), dtype=float)
        assert D.shape == (n, n)
        assert np.allclose(D, D.T, atol=0)
        assert np.all(np.diag(D) == 0)
        assert np.all(D >= 0)
    assert main(["distance", spec, cfg, data, "--out", str(out)]) == EXIT_OK
    assert main(["distance", spec, cfg, data, "--out", str(out)]) == EXIT_FAIL
    assert main(["distance", spec, cfg, data, "--out", str(out), "--force"]) == EXIT_OK
    # points from several subproblems cannot share a sub distance
    assert main(["distance", spec, cfg, data, "--approach", "sub"]) == EXIT_INVALID


def test_distance_rejects_unknown_variable(tmp_path, v3):
    _, spec, data, n = v3
    cfg = _write_json(tmp_path / "cfg.json", {"weights": {"nope": 1.0}})
    assert main(["distance", spec, cfg, data]) == EXIT_INVALID


def test_fit_predict_idw_and_knn(tmp_path, v3, capsys):
    _, spec, data, n = v3
    cfg = _write_json(tmp_path / "cfg.json", {})
    for model in ("idw", "knn"):
        for approach in ("meta", "sub", "hybrid"):
            out = tmp_path / f"{model}_{approach}.csv"
            code = main(["fit-predict", spec, cfg, data, data, "--model", model, "--approach", approach,
                         "--out", str(out)])
            assert code == EXIT_OK
            rows = _read_csv(out)
            assert rows[0] == ["prediction", "fallback"]
            assert len(rows) == n + 1
            assert all(r[1] == "0" for r in rows[1:])
    # IDW reproduces training targets at training points
    with open(data, newline="") as fh:
        targets = [float(r["target"]) for r in csv.DictReader(fh)]
    pred = [float(r[0]) for r in _read_csv(tmp_path / "idw_meta.csv")[1:]]
    assert pred == pytest.approx(targets, rel=1e-12)


def test_tune_then_fit_predict(tmp_path, v3):
    _, spec, data, n = v3
    res = tmp_path / "tuned.json"
    code = main(["tune", spec, data, "--approach", "sub", "--model", "idw", "--budget-mult", "3", "--seed", "1",
                 "--out", str(res)])
    assert code == EXIT_OK
    out = json.loads(res.read_text())
    assert out["evaluations"] == out["budget"] == 3 * out["n_params"]
    cfg = _write_json(tmp_path / "best.json", out["best_config"])
    pred = tmp_path / "pred.csv"
    assert main(["fit-predict", spec, cfg, data, data, "--model", "idw", "--approach", "sub",
                 "--out", str(pred)]) == EXIT_OK
    assert len(_read_csv(pred)) == n + 1
    assert main(["tune", spec, data, "--budget-mult", "3", "--out", str(res)]) == EXIT_FAIL


def test_tune_requires_dataset(v3):
    _, spec, _, _ = v3
    assert main(["tune", spec]) == EXIT_USAGE


def test_bench_run_and_profile(tmp_path):
    out = tmp_path / "bench"
    args = ["bench", "run", "--variants", "1", "--sizes", "VS", "--arch", "MLP", "--seeds", "1",
            "--budget-mult", "2", "--knn-budget-mult", "2", "--jobs", "1", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert (out / "manifest.json").exists()
    assert main(args) == EXIT_FAIL
    prof = tmp_path / "prof"
    assert main(["bench", "profile", "--in", str(out), "--out", str(prof)]) == EXIT_OK
    assert prof.read_text().splitlines()[0]
    assert main(["bench", "profile", "--in", str(tmp_path / "nowhere"), "--out", str(tmp_path / "p2")]) == EXIT_INPUT
