import csv
import json
import math
import subprocess
import sys

import pytest
from scipy.special import exp1

from saddlenode.acceptance import roundtrip_field
from saddlenode.cli import main, thread_cap
from saddlenode.errors import ValidationError
from saddlenode.painleve import painleve1_field


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    out = json.loads(cap.out) if cap.out.strip() else None
    return code, out, cap.err


def test_normalize_writes_params_and_map(tmp_path, capsys):
    field = tmp_path / "p1.json"
    field.write_text(painleve1_field(5, 7).to_json())
    code, out, _ = run(capsys, "normalize", "--in", str(field), "--out", str(tmp_path / "o"))
    assert code == 0
    assert out["version"] == "1.0" and out["residue"] == {"re": 1.0, "im": 0.0}
    assert out["det_defect"] < 1e-9
    params = json.loads((tmp_path / "o" / "params.json").read_text())
    assert params["version"] == "1.0"
    assert (tmp_path / "o" / "map.json").exists()


def test_normalize_rejects_short_field(tmp_path, capsys):
    field = tmp_path / "p1.json"
    field.write_text(painleve1_field(5, 7).to_json())
    code, out, err = run(capsys, "normalize", "--in", str(field), "--N", "4")
    assert code == 2 and out is None
    diag = json.loads(err)
    assert diag["exit_code"] == 2 and diag["error"] == "ValidationError"


def test_bad_input_file_is_a_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "normalize", "--in", str(bad))[0] == 2
    assert run(capsys, "normalize", "--in", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "borel-sum", "--euler", "--x", "0.1", "--tol", "-1")[0] == 2


def test_borel_sum_euler(capsys):
    code, out, _ = run(capsys, "borel-sum", "--euler", "--x", "0.1")
    assert code == 0
    assert abs(out["value"]["re"] - math.exp(10) * exp1(10)) < 1e-12
    assert run(capsys, "borel-sum", "--x", "0.1")[0] == 2
    assert run(capsys, "borel-sum", "--euler")[0] == 2


def test_runtime_failure_exit_code(capsys):
    # the Pade continuation has its pole on the negative real axis
    code, out, err = run(capsys, "borel-sum", "--euler", "--x", "-0.1", "--theta", str(math.pi))
    assert code == 1 and out is None
    assert json.loads(err)["error"] == "ContinuationFailure"


def test_borel_sum_of_series_file(tmp_path, capsys):
    _, [(_, Y)] = roundtrip_field(6, 3, count=1)
    path = tmp_path / "s.json"
    path.write_text(Y.X1.to_json())
    code, out, _ = run(capsys, "borel-sum", "--in", str(path), "--x", "0.05", "--y1", "0.01", "--y2", "0.02")
    assert code == 0 and out["variant"] == "standard" and set(out["growth"]) == {"A", "B", "C"}


def test_stable_domain_csv(tmp_path, capsys):
    code, out, _ = run(capsys, "stable-domain", "--a", "1.1", "--samples", "200", "--grid", "11",
                       "--out", str(tmp_path))
    assert code == 0 and out["inner_in_omega"] and out["omega_in_outer"]
    lines = (tmp_path / "stable_domain.csv").read_text().splitlines()
    assert lines[0] == "# version 1.0"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["re_x", "im_x", "in_omega"] and len(rows) == 1 + 11 * 11
    assert run(capsys, "stable-domain", "--a", "-1")[0] == 2
    assert run(capsys, "stable-domain", "--a", "1", "--orientation", "sideways")[0] == 2


def test_stokes_epsilon(tmp_path, capsys):
    code, out, _ = run(capsys, "stokes", "--N", "3", "--epsilon", "0.05", "--out", str(tmp_path))
    assert code == 0
    assert out["normalization_defect"] < 1e-8 and out["index_range_defect"] < 1e-8
    assert out["invariant_varieties"]["H1"]
    data = json.loads((tmp_path / "stokes.json").read_text())
    assert data["version"] == "1.0" and data["n_max"] == 3


def test_sectorial_conjugate(tmp_path, capsys):
    _, [(_, Y)] = roundtrip_field(8, 6)
    field = tmp_path / "y.json"
    field.write_text(Y.to_json())
    code, out, _ = run(capsys, "sectorial-conjugate", "--in", str(field), "--N", "2", "--samples", "2",
                       "--out", str(tmp_path))
    assert code == 0 and out["residual_plus"] < 1e-5 and out["residual_minus"] < 1e-5
    pts = json.loads((tmp_path / "sectorial_values.json").read_text())["points"]
    assert len(pts) == 4
    assert run(capsys, "sectorial-conjugate", "--in", str(field), "--N", "6")[0] == 2


def test_painleve1_is_deterministic(tmp_path, capsys):
    outs = []
    for d in ("a", "b"):
        code, out, _ = run(capsys, "painleve1", "--N", "3", "--ny", "7", "--out", str(tmp_path / d))
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    for name in ("p1.json", "params.json", "map.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert abs(outs[0]["kapaev_target_modulus"] - 0.8393661845719881) < 1e-15


def test_selftest_subset(capsys):
    code, out, err = run(capsys, "selftest", "--criteria", "3", "8")
    assert code == 0 and out["passed"]
    assert "criterion 3" in err and "PASS" in err
    assert run(capsys, "selftest", "--criteria", "9")[0] == 2


def test_thread_cap():
    assert thread_cap({}) == 1
    assert thread_cap({"SADDLENODE_THREADS": "4"}) == 4
    for bad in ("0", "-2", "many"):
        with pytest.raises(ValidationError):
            thread_cap({"SADDLENODE_THREADS": bad})


def test_module_entry_point_and_thread_env(tmp_path):
    ok = subprocess.run([sys.executable, "-m", "saddlenode", "borel-sum", "--euler", "--x", "0.2"],
                        capture_output=True, text=True)
    assert ok.returncode == 0 and json.loads(ok.stdout)["version"] == "1.0"
    bad = subprocess.run([sys.executable, "-m", "saddlenode", "borel-sum", "--euler", "--x", "0.2"],
                         capture_output=True, text=True, env={"SADDLENODE_THREADS": "zero", "PATH": ""})
    assert bad.returncode == 2
