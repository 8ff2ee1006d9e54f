import csv
import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from topk_eigen.cli import BENCH_COLUMNS, REPORT_SCHEMA, build_parser, main
from topk_eigen.sparse import save_matrix_market
from topk_eigen.synthetic import random_sparse_symmetric

from conftest import write_mtx


@pytest.fixture
def diag3(tmp_path):
    return str(write_mtx(tmp_path / "diag3.mtx", "real general", "3 3 3", ["1 1 5", "2 2 2", "3 3 1"]))


@pytest.fixture
def path3(tmp_path):
    return str(write_mtx(tmp_path / "path3.mtx", "real symmetric", "3 3 2", ["2 1 1", "3 2 1"]))


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_json(diag3, capsys):
    code, out, _ = run(["solve", "--matrix", diag3, "--k", "2"], capsys)
    assert code == 0
    rep = json.loads(out)
    jsonschema.validate(rep, REPORT_SCHEMA)
    assert np.allclose(rep["eigenvalues"], [5.0, 2.0], atol=1e-6)
    assert rep["config"]["arith"] == "fixed:30" and rep["config"]["trig"] == "taylor3"
    assert rep["config"]["reorth"] == "every_two" and rep["config"]["cus"] == 5
    assert rep["schema"] == "v1" and rep["n"] == 3 and rep["nnz"] == 3


def test_solve_json_roundtrip(diag3, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["solve", "--matrix", diag3, "--k", "2", "--precise", "--output", str(out)]) == 0
    rep = json.loads(out.read_text())
    jsonschema.validate(rep, REPORT_SCHEMA)
    assert json.loads(json.dumps(rep)) == rep
    assert rep["eigenvalues"] == pytest.approx([5.0, 2.0], abs=1e-12)
    assert rep["config"]["arith"] == "f64"


def test_solve_csv(path3, capsys):
    code, out, _ = run(["solve", "--matrix", path3, "--k", "1", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1 and float(rows[0]["eigenvalue"]) == pytest.approx(np.sqrt(2), abs=1e-6)


@pytest.mark.parametrize("argv", [
    ["solve", "--k", "0", "--matrix", "x.mtx"],
    ["solve", "--k", "1"],
    ["solve", "--matrix", "x.mtx", "--k", "1", "--reorth", "bogus"],
    ["nope"],
])
def test_usage_errors_exit_1(argv, diag3, capsys):
    argv = [diag3 if a == "x.mtx" else a for a in argv]
    with pytest.raises(SystemExit) as e:
        code = main(argv)
        raise SystemExit(code)
    assert e.value.code == 1


def test_runtime_errors(diag3, tmp_path, capsys):
    assert main(["solve", "--matrix", str(tmp_path / "missing.mtx"), "--k", "1"]) == 1
    assert main(["solve", "--matrix", diag3, "--k", "4"]) == 1
    assert main(["solve", "--matrix", diag3, "--k", "1", "--arith", "f16"]) == 1
    asym = write_mtx(tmp_path / "a.mtx", "real general", "2 2 1", ["1 2 1.0"])
    assert main(["solve", "--matrix", str(asym), "--k", "1"]) == 1
    capsys.readouterr()
    assert main(["solve", "--matrix", str(asym), "--k", "1", "--symmetrize", "--precise"]) == 0


def test_warning_exit_code(tmp_path, capsys):
    m = random_sparse_symmetric(40, 0.2, seed=1)
    path = tmp_path / "m.mtx"
    save_matrix_market(path, m)
    code, out, _ = run(["solve", "--matrix", str(path), "--k", "8", "--tol", "1e-300", "--precise"], capsys)
    assert code == 2
    assert json.loads(out)["warnings"]


def test_verify(tmp_path, capsys):
    m = random_sparse_symmetric(120, 0.05, seed=2)
    path = tmp_path / "m.mtx"
    save_matrix_market(path, m)
    code, out, err = run(["verify", "--matrix", str(path), "--k", "4", "--precise", "--ncv", "120"], capsys)
    assert code == 0 and "PASS" in err
    rep = json.loads(out)
    jsonschema.validate(rep, REPORT_SCHEMA)
    assert rep["verify"]["passed"] and rep["verify"]["max_relative_error"] <= 1e-6
    code, out, err = run(["verify", "--matrix", str(path), "--k", "4", "--ncv", "120"], capsys)
    assert code == 0 and json.loads(out)["verify"]["threshold"] == 1e-3


def test_verify_refuses_large(capsys):
    code, _, err = run(["verify", "--matrix", "synth:5000:4", "--k", "2"], capsys)
    assert code == 1 and "oracle infeasible" in err


def test_bench(diag3, path3, capsys):
    code, out, _ = run(["bench", "--matrix", diag3, "--matrix", path3, "--k", "1", "2", "--reps", "3"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == BENCH_COLUMNS and len(rows) == 13
    assert all(float(r[BENCH_COLUMNS.index("ns_per_nnz")]) > 0 for r in rows[1:])


def test_bench_defaults_and_determinism(capsys):
    args = build_parser().parse_args(["bench", "--matrix", "synth:300:6"])
    assert args.reps == 20
    col = BENCH_COLUMNS.index("eigenvalues")
    outs = []
    for _ in range(2):
        code, out, _ = run(["bench", "--matrix", "synth:300:6:4", "--k", "3", "--reps", "1", "--seed", "9"], capsys)
        assert code == 0
        outs.append([r[col] for r in csv.reader(io.StringIO(out))][1:])
    assert outs[0] == outs[1]


def test_threads_env(diag3, monkeypatch, capsys):
    monkeypatch.setenv("TOPK_EIGEN_THREADS", "3")
    code, out, _ = run(["solve", "--matrix", diag3, "--k", "1"], capsys)
    assert code == 0 and json.loads(out)["config"]["threads"] == 3


def test_module_entry_point(diag3):
    r = subprocess.run([sys.executable, "-m", "topk_eigen", "solve", "--matrix", diag3, "--k", "1", "--precise"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["eigenvalues"] == pytest.approx([5.0])
