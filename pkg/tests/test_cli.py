import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gentensor.cli import main
from gentensor.claims import CLAIMS
from gentensor.tensor_core import read_gten

FIXTURES = Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_all(capsys):
    code, out, _ = run(capsys, "verify", "--claims", "all", "--seed", "42")
    rows = [json.loads(line) for line in out.splitlines()]
    assert code == 0
    assert len(rows) >= 14 and [r["claim"] for r in rows] == list(CLAIMS)
    assert all(r["pass"] and r["seed"] == 42 and r["millis"] is None for r in rows)
    assert set(rows[0]) == {"claim", "pass", "witnesses", "tolerance", "seed", "millis"}


def test_verify_single_claim_ceilings(capsys):
    code, out, _ = run(capsys, "verify", "--claims", "relu-avg-nonuniversal")
    (row,) = [json.loads(line) for line in out.splitlines()]
    assert code == 0
    w = row["witnesses"]
    assert w["shallow_ceiling"] == 2
    assert w["deep_ceiling"] == 2 * w["m"] ** (w["n"] // 4)


def test_verify_unknown_claim(capsys):
    code, _, err = run(capsys, "verify", "--claims", "no-such-claim")
    assert code == 2 and "no-such-claim" in err


def test_verify_timing_fills_millis(capsys, tmp_path):
    out = tmp_path / "r.jsonl"
    assert run(capsys, "verify", "--claims", "matrix-sum-rank", "--timing", "--out", str(out))[0] == 0
    assert json.loads(out.read_text())["millis"] >= 0


def test_rank_hist_product(capsys, tmp_path):
    code, out, _ = run(capsys, "rank-hist", "--operator", "product", "--levels", "2", "--m", "2",
                       "--ranks", "2", "--trials", "100", "--out", str(tmp_path))
    assert code == 0 and "median=4" in out
    (csv,) = tmp_path.glob("*.csv")
    body = [line for line in csv.read_text().splitlines() if not line.startswith("#")]
    assert body == ["rank,count", "4,100"]


def test_rank_hist_spectra(capsys, tmp_path):
    run(capsys, "rank-hist", "--levels", "2", "--m", "2", "--ranks", "2,3", "--trials", "4",
        "--out", str(tmp_path), "--spectra")
    assert len(list(tmp_path.glob("*_spectra.csv"))) == 2


@pytest.mark.parametrize("argv", [["--trials", "0"], ["--ranks", "a,b"], ["--operator", "mean"]])
def test_rank_hist_usage_errors(capsys, tmp_path, argv):
    assert run(capsys, "rank-hist", "--out", str(tmp_path), *argv)[0] == 2


@pytest.mark.parametrize("name", ["indicator_relu_max", "deep_trivial", "outer_product"])
def test_grid_matches_fixture(capsys, tmp_path, name):
    out = tmp_path / "t.gten"
    code, _, _ = run(capsys, "grid", str(FIXTURES / f"{name}.json"), "--out", str(out))
    assert code == 0
    assert out.read_bytes() == (FIXTURES / f"{name}.gten").read_bytes()


def test_grid_matricize_csv(capsys, tmp_path):
    out, csv = tmp_path / "t.gten", tmp_path / "t.csv"
    run(capsys, "grid", str(FIXTURES / "deep_trivial.json"), "--out", str(out), "--matricize", str(csv))
    np.testing.assert_array_equal(np.loadtxt(csv, delimiter=","), np.full((4, 4), 4.0))


def test_grid_with_f_file(capsys, tmp_path):
    from gentensor.tensor_core import write_gten

    write_gten(tmp_path / "f.gten", np.array([[1.0, 0.5], [0.0, 2.0]]))
    cfg = json.loads((FIXTURES / "indicator_relu_max.json").read_text())
    cfg["f"] = "f.gten"
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run(capsys, "grid", str(tmp_path / "c.json"), "--out", str(tmp_path / "t.gten"))[0] == 0
    np.testing.assert_allclose(read_gten(tmp_path / "t.gten"), read_gten(FIXTURES / "indicator_relu_max.gten"), atol=1e-12)


def test_grid_network_config(capsys, tmp_path):
    cfg = {"n": 4, "m": 2, "architecture": "deep", "operator": "relu-max",
           "templates": [[0.0], [1.0]],
           "repr": {"kind": "identity-onehot"},
           "widths": [2, 2], "construction": {"name": "trivial"}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run(capsys, "grid", str(tmp_path / "c.json"), "--out", str(tmp_path / "t.gten"))[0] == 0
    np.testing.assert_array_equal(read_gten(tmp_path / "t.gten"), np.full((2,) * 4, 4.0))


def test_grid_malformed_json(capsys, tmp_path):
    code, _, err = run(capsys, "grid", str(FIXTURES / "malformed.json"), "--out", str(tmp_path / "x"))
    assert code == 2
    assert "malformed.json:4:3" in err


def test_grid_size_guard(capsys, tmp_path):
    cfg = {"n": 4, "m": 2, "mode": "cp", "construction": {"name": "indicator", "index": [1, 1, 1, 1]},
           "operator": "relu-max"}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    code, _, err = run(capsys, "grid", str(tmp_path / "c.json"), "--out", str(tmp_path / "t"),
                       "--max-elements", "8")
    assert code == 2 and "size guard" in err


def test_grid_missing_key(capsys, tmp_path):
    (tmp_path / "c.json").write_text('{"m": 2}')
    code, _, err = run(capsys, "grid", str(tmp_path / "c.json"), "--out", str(tmp_path / "t"))
    assert code == 2 and "'n'" in err


def test_interp_worked_example(capsys, tmp_path):
    out = tmp_path / "w.csv"
    code, stdout, _ = run(capsys, "interp", str(FIXTURES / "lemma_points.csv"), "--out", str(out))
    assert code == 0 and "pass" in stdout
    assert out.read_text() == "w1,b,a\n1,0,5\n1,-1,-3\n"


def test_console_script():
    exe = shutil.which("gentensor")
    cmd = [exe] if exe else [sys.executable, "-m", "gentensor.cli"]
    proc = subprocess.run(cmd + ["verify", "--claims", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
