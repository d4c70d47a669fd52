import csv
import json

import pytest

from robin_dd.cli import main
from robin_dd.diagnostics import CSV_COLUMNS


def write_cfg(tmp_path, body, name="c.ini"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


LINEAR = """
[problem]
preset = linear
source = 1 + 2*x
[mesh]
n = 16
[method]
s = 1
tol_gap = 1e-8
"""


def test_run_writes_outputs_and_passes(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "linear_1d", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.count("[PASS]") == 4
    with open(out / "history.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    doc = json.loads((out / "summary.json").read_text())
    assert doc["status"]["converged"]
    assert set(doc["certificates"]) == {"p_structure", "transmission", "contraction", "monotone_pairing"}


def test_run_is_deterministic(tmp_path):
    for k in (1, 2):
        assert main(["run", "plap4_1d", "--out", str(tmp_path / str(k))]) == 0
    assert (tmp_path / "1" / "history.csv").read_bytes() == (tmp_path / "2" / "history.csv").read_bytes()
    assert (tmp_path / "1" / "summary.json").read_bytes() == (tmp_path / "2" / "summary.json").read_bytes()


def test_certify_rechecks_stored_run(tmp_path, capsys):
    out = tmp_path / "run"
    main(["run", "linear_1d", "--out", str(out)])
    capsys.readouterr()
    assert main(["certify", str(out / "history.csv"), str(out / "summary.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["[PASS] contraction", "[PASS] monotone_pairing"]


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["run", str(tmp_path / "missing.ini")]) == 1
    bad = write_cfg(tmp_path, LINEAR.replace("s = 1", "s = -1"))
    assert main(["run", bad, "--out", str(tmp_path / "o")]) == 1
    assert "s must be positive" in capsys.readouterr().err
    assert main(["sweep", "linear_1d", "--axis", "s", "--values", ""]) == 1
    assert main(["sweep", "linear_1d", "--axis", "q", "--values", "1"]) == 1
    y_in_1d = write_cfg(tmp_path, LINEAR.replace("1 + 2*x", "x + y"))
    assert main(["run", y_in_1d, "--out", str(tmp_path / "o")]) == 1


def test_nonconvergence_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, LINEAR.replace("tol_gap = 1e-8", "tol_gap = 1e-15\nmax_outer = 2"))
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == 2
    assert (out / "history.csv").exists()


def test_certificate_violation_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, LINEAR.replace("tol_gap = 1e-8", "tol_gap = 1e-3\npairing_tol = 1e-30"))
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 3


def test_newton_failure_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, LINEAR.replace("preset = linear", "preset = resolvent\np = 4")
                    + "[newton]\nmax_iter = 1\n")
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "failed" in capsys.readouterr().out


@pytest.mark.slow
def test_sweep_over_s(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "linear_1d", "--axis", "s", "--values", "0.25,1,4", "--out", str(out),
                 "--workers", "2"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["aggregate.csv", "s=0.25", "s=1", "s=4"]
    with open(out / "aggregate.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["0.25", "1", "4"]
    assert all(r["exit_code"] == "0" and r["converged"] == "1" for r in rows)
    its = [int(r["iterations"]) for r in rows]
    assert its[1] < its[0]


@pytest.mark.slow
def test_sweep_over_h(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "plap4_1d", "--axis", "h", "--values", "16 32 64", "--out", str(out)]) == 0
    assert (out / "h=64" / "history.csv").exists()


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ROBIN_DD_OUTPUT_ROOT", str(tmp_path))
    assert main(["run", "linear_1d", "--out", "rel"]) == 0
    assert (tmp_path / "rel" / "summary.json").exists()
