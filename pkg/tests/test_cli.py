import json
import subprocess
import sys

import numpy as np
import pytest

from distr.cli import main, read_matrix, write_binary


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def blob_csv(tmp_path):
    path = tmp_path / "blobs.csv"
    assert run("synth", "--kind", "blobs", "--k", 3, "--sizes", "15,20,25", "--separation", 30,
               "--seed", 0, "--out", path) == 0
    return path


RUN = ("--method", "distr", "--cx", "entropic_affinity", "--cz", "student", "--loss", "kl",
       "--n", 3, "--perplexity", 10, "--labels-col", "last")


def test_synth_is_deterministic(tmp_path, blob_csv):
    again = tmp_path / "again.csv"
    run("synth", "--kind", "blobs", "--k", 3, "--sizes", "15,20,25", "--separation", 30, "--seed", 0,
        "--out", again)
    assert blob_csv.read_bytes() == again.read_bytes()
    X, y = read_matrix(blob_csv, "last")
    assert X.shape == (60, 3)
    np.testing.assert_array_equal(np.bincount(y), [15, 20, 25])


def test_synth_bad_sizes(tmp_path, capsys):
    assert run("synth", "--k", 3, "--sizes", "1,2", "--out", tmp_path / "x.csv") == 3
    assert json.loads(capsys.readouterr().err)["error"]["code"] == "configuration_error"


def test_run_and_eval_round_trip(tmp_path, blob_csv):
    out = tmp_path / "run"
    assert run("run", "--input", blob_csv, "--out", out, *RUN) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert 1 <= summary["effective_n"] <= 3 and 0.0 <= summary["homogeneity"] <= 1.0
    trace = np.loadtxt(out / "trace.csv")
    assert summary["final_objective"] == trace[-1] and len(trace) == summary["n_outer"] + 1
    for name in ("embeddings.csv", "coupling.csv", "weights.csv", "trace.csv", "labels.csv", "scatter.svg"):
        assert (out / name).is_file()
    T = np.loadtxt(out / "coupling.csv", delimiter=",")
    w = np.loadtxt(out / "weights.csv")
    np.testing.assert_allclose(w, T.sum(0))
    assert summary["effective_n"] == np.count_nonzero(w >= 1e-4)
    scores = tmp_path / "scores.json"
    assert run("eval", "--run", out, "--out", scores) == 0
    got = json.loads(scores.read_text())
    for key in ("homogeneity", "silhouette", "combined", "effective_n"):
        assert got[key] == summary[key]


def test_run_is_reproducible_and_binary_input(tmp_path, blob_csv):
    X, _ = read_matrix(blob_csv, "last")
    write_binary(tmp_path / "x.bin", X)
    args = [a for a in RUN if a not in ("--labels-col", "last")]
    run("run", "--input", blob_csv, "--out", tmp_path / "a", *RUN)
    run("run", "--input", tmp_path / "x.bin", "--out", tmp_path / "b", *args)
    a = (tmp_path / "a" / "embeddings.csv").read_bytes()
    assert a == (tmp_path / "b" / "embeddings.csv").read_bytes()
    summary = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert summary["homogeneity"] is None and summary["silhouette"] is None


def test_eval_permutation_invariance(tmp_path, blob_csv):
    out = tmp_path / "run"
    run("run", "--input", blob_csv, "--out", out, *RUN)
    Z = np.loadtxt(out / "embeddings.csv", delimiter=",")
    T = np.loadtxt(out / "coupling.csv", delimiter=",")
    perm = [2, 0, 1]
    np.savetxt(tmp_path / "Z.csv", Z[perm], delimiter=",")
    np.savetxt(tmp_path / "T.csv", T[:, perm], delimiter=",")
    run("eval", "--run", out, "--out", tmp_path / "s0.json")
    run("eval", "--embeddings", tmp_path / "Z.csv", "--coupling", tmp_path / "T.csv",
        "--labels", out / "labels.csv", "--out", tmp_path / "s1.json")
    s0 = json.loads((tmp_path / "s0.json").read_text())
    s1 = json.loads((tmp_path / "s1.json").read_text())
    assert s0["homogeneity"] == s1["homogeneity"]
    assert abs(s0["silhouette"] - s1["silhouette"]) < 1e-12


def test_config_file_precedence(tmp_path, blob_csv):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for this run\nn = 4\nmax_outer = 2\nperplexity = 10\n")
    run("run", "--input", blob_csv, "--out", tmp_path / "r", "--config", cfg, "--n", 2, "--labels-col", "last")
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert summary["n"] == 2 and summary["config"]["max_outer"] == 2


def test_sequential_methods(tmp_path, blob_csv):
    for method in ("dr_then_c", "c_then_dr"):
        out = tmp_path / method
        assert run("run", "--input", blob_csv, "--out", out, "--method", method, "--n", 3,
                   "--perplexity", 10, "--labels-col", "last") == 0
        assert json.loads((out / "summary.json").read_text())["homogeneity"] == 1.0


def test_project_on_grid(tmp_path):
    rng = np.random.default_rng(0)
    X = np.concatenate([c + 0.3 * rng.standard_normal((30, 2)) for c in ([-2.0, -2.0], [2.0, 2.0])])
    g = np.linspace(-3, 3, 4)
    grid = np.array([(a, b) for a in g for b in g])
    np.savetxt(tmp_path / "pts.csv", X, delimiter=",")
    np.savetxt(tmp_path / "grid.csv", grid, delimiter=",")
    out = tmp_path / "proj"
    assert run("run", "--input", tmp_path / "pts.csv", "--out", out, "--method", "project",
               "--support", tmp_path / "grid.csv", "--cx", "gram", "--cz", "gram", "--loss", "l2") == 0
    np.testing.assert_allclose(np.loadtxt(out / "embeddings.csv", delimiter=","), grid)
    T = np.loadtxt(out / "coupling.csv", delimiter=",")
    used = [set(np.flatnonzero(T[rows].sum(0) > 1e-9)) for rows in (slice(0, 30), slice(30, 60))]
    assert not used[0] & used[1]
    w = np.loadtxt(out / "weights.csv")
    assert np.sort(w)[::-1][:6].sum() > 0.99


def test_missing_input(tmp_path, capsys):
    assert run("run", "--input", tmp_path / "nope.csv", "--out", tmp_path / "o") == 2
    err = json.loads(capsys.readouterr().err)["error"]
    assert err["code"] == "io_not_found"


def test_bad_configuration(tmp_path, blob_csv, capsys):
    out = tmp_path / "o"
    assert run("run", "--input", blob_csv, "--out", out, "--cx", "gram", "--loss", "kl") == 3
    assert json.loads(capsys.readouterr().err)["error"]["code"] == "configuration_error"


def test_bad_binary(tmp_path, capsys):
    path = tmp_path / "x.bin"
    path.write_bytes(b"\x01\x02")
    assert run("run", "--input", path, "--out", tmp_path / "o") == 2
    assert json.loads(capsys.readouterr().err)["error"]["code"] == "io_bad_format"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "distr", "synth", "--kind", "circle3d", "--n-samples", "12",
                           "--out", str(tmp_path / "c.csv")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert np.loadtxt(tmp_path / "c.csv", delimiter=",").shape == (12, 3)
