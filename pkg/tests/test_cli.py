import json

import numpy as np
import pytest

from dro_var.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_probe_inline(capsys):
    code, out, _ = _run(capsys, "probe", "--z", "0,1", "--rho", "0.5")
    doc = json.loads(out)
    assert code == 0
    assert doc["value"] == pytest.approx(0.853553, abs=1e-6)
    assert {"weights", "lambda", "eta", "fast_path", "expansion_gap", "wall_time"} <= set(doc)


def test_probe_rho_zero_uniform(capsys):
    code, out, _ = _run(capsys, "probe", "--z", "1,2,3,4", "--rho", "0")
    doc = json.loads(out)
    assert doc["weights"] == [0.25] * 4 and doc["lambda"] is None


def test_probe_file_and_random(capsys, tmp_path):
    p = tmp_path / "z.txt"
    p.write_text("1 2\n3\n")
    code, out, _ = _run(capsys, "probe", "--z-file", str(p), "--rho", "1")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(8 / 3, abs=1e-12)
    code, out, _ = _run(capsys, "probe", "--random", "1000", "--seed", "3", "--rho", "2", "--omit-weights")
    assert code == 0 and "weights" not in json.loads(out)


@pytest.mark.parametrize("argv,code", [
    (["probe", "--rho", "1"], 4),
    (["probe", "--z", "1,x", "--rho", "1"], 4),
    (["probe", "--z", "1,2", "--rho", "-1"], 4),
    (["probe", "--z-file", "/nonexistent/z.txt", "--rho", "1"], 2),
])
def test_probe_errors(capsys, argv, code):
    assert _run(capsys, *argv)[0] == code


SEPARABLE = "1 1:1 2:1\n1 1:2\n-1 1:-1\n-1 2:-2\n"


def test_fit_separable(capsys, tmp_path):
    p = tmp_path / "train.svm"
    p.write_text(SEPARABLE)
    out = tmp_path / "fit.json"
    code, _, _ = _run(capsys, "fit", str(p), "--rho", "1", "--constraint", "l2:10", "--out", str(out))
    doc = json.loads(out.read_text())
    assert code == 0
    assert doc["train"]["error"] == 0.0
    assert doc["theta"]["index_base"] == 1
    assert doc["certificate"]["M_source"] == "observed"
    assert np.linalg.norm([v for _, v in doc["theta"]["entries"]]) <= 10 + 1e-9


def test_fit_rho_zero_byte_identical_to_erm(capsys, tmp_path):
    p = tmp_path / "train.svm"
    p.write_text("1 1:0.5 2:1\n-1 1:1 2:-0.2\n1 2:0.3\n-1 1:-1\n1 1:0.1 2:-0.4\n")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    _run(capsys, "fit", str(p), "--rho", "0", "--out", str(a), "--max-iter", "50")
    _run(capsys, "fit", str(p), "--out", str(b), "--max-iter", "50")
    assert a.read_bytes() == b.read_bytes()


def test_fit_csv_with_bias(capsys, tmp_path):
    p = tmp_path / "train.csv"
    p.write_text("x1,x2,label\n1,2,1\n-1,0,-1\n2,1,1\n-2,-1,-1\n")
    code, out, _ = _run(capsys, "fit", str(p), "--format", "csv", "--add-bias", "--constraint", "en:1,1,5",
                        "--rho", "0.5", "--M", "3")
    doc = json.loads(out)
    assert code == 0 and doc["d"] == 3 and doc["bias_column"] == 3
    assert doc["certificate"]["M_source"] == "a_priori"


def test_fit_missing_file_leaves_no_output(capsys, tmp_path):
    out = tmp_path / "fit.json"
    code, _, err = _run(capsys, "fit", str(tmp_path / "missing.svm"), "--out", str(out))
    assert code == 2 and not out.exists() and "error" in err
    assert list(tmp_path.iterdir()) == []


def test_fit_parse_and_config_errors(capsys, tmp_path):
    p = tmp_path / "bad.svm"
    p.write_text("1 2:1 1:1\n")
    assert _run(capsys, "fit", str(p))[0] == 3
    p.write_text(SEPARABLE)
    assert _run(capsys, "fit", str(p), "--constraint", "l7:1")[0] == 4
    assert _run(capsys, "fit", str(p), "--rho", "-2")[0] == 4


def test_fit_unwritable_output(capsys, tmp_path):
    p = tmp_path / "train.svm"
    p.write_text(SEPARABLE)
    assert _run(capsys, "fit", str(p), "--out", str(tmp_path / "no" / "dir.json"))[0] == 2


def test_median_and_simulate_deterministic_output(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert _run(capsys, "median", "--n", "30", "--reps", "100", "--seed", "4", "--out", str(path))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("# dro-var schema v1")
    j1, j2 = tmp_path / "s1.json", tmp_path / "s2.json"
    for path in (j1, j2):
        _run(capsys, "simulate", "--d", "2", "--n", "20", "--B", "1", "--reps", "3", "--r", "1",
             "--out", str(path))
    assert j1.read_bytes() == j2.read_bytes()
    assert json.loads(j1.read_text())["experiment"] == "simulate"


def test_coverage_command(capsys):
    code, out, _ = _run(capsys, "coverage", "--d", "2", "--n", "50", "--reps", "100", "--r", "1")
    assert code == 0
    last = out.strip().splitlines()[-1]
    assert "aggregate" in last


def test_threads_env_default(capsys, monkeypatch):
    monkeypatch.setenv("DRO_VAR_THREADS", "zero")
    assert _run(capsys, "median", "--n", "20", "--reps", "100")[0] == 4


def test_simulate_rho_rule(capsys):
    code, out, _ = _run(capsys, "simulate", "--d", "2", "--n", "20", "--B", "0.5", "--reps", "2",
                        "--rho-rule", "fixed:2.5", "--r", "1")
    assert code == 0 and ",2.5," in out
    for rule in ("magic:1", "fixed:abc", "fixed:"):
        assert _run(capsys, "simulate", "--reps", "2", "--rho-rule", rule)[0] == 4
