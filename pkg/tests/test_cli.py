import csv
import json

import pytest

from bm_lab.cli import main, run_command
from bm_lab.reports import SCHEMA


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out.strip().splitlines(), err


def test_verify_ball_poincare_example(tmp_path, capsys):
    out = tmp_path / "a" / "b"
    code, lines, _ = _run(capsys, ["verify", "ball-poincare", "--n", "2", "--p", "0.5", "--phi", "l2:1.0",
                                   "--out", str(out)])
    assert code == 0
    assert lines[-1] == "SUMMARY pass=1 fail=0 inconclusive=0"
    files = list(out.glob("*.json"))
    assert len(files) == 1
    doc = json.loads(files[0].read_text())
    assert doc["schema"] == SCHEMA
    assert len(doc["items"]) == 1
    item = doc["items"][0]
    assert set(item) >= {"name", "params", "lhs", "rhs", "margin", "est_error", "verdict", "artifacts"}


def test_scan_example_writes_21_rows(tmp_path, capsys):
    code, lines, _ = _run(capsys, ["scan", "bm", "--n", "2", "--p", "0", "--phi", "l2:1.0", "--eps", "0.05",
                                   "--refinement", "1", "--out", str(tmp_path)])
    assert code == 0
    assert lines[-1].startswith("SUMMARY ")
    csvs = list(tmp_path.glob("*.csv"))
    assert len(csvs) == 1
    with open(csvs[0]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 21
    assert list(rows[0]) == ["s", "value", "chord", "second_difference"]


@pytest.mark.parametrize("argv", [
    ["verify", "ball-poincare", "--n", "2", "--p", "0.5", "--phi", ""],
    ["verify", "ball-poincare", "--n", "4", "--p", "0.5", "--phi", "l2:1.0"],
    ["verify", "ball-poincare", "--n", "2", "--p", "0.5", "--phi", "l2:oops"],
    ["verify", "poincare-general", "--n", "2", "--p", "1", "--phi", "l2:1.0", "--body", "triangle"],
])
def test_usage_errors_exit_2(tmp_path, capsys, argv):
    code, _, err = _run(capsys, argv + ["--out", str(tmp_path)])
    assert code == 2
    assert err.startswith("bm-lab: usage error:")
    assert not list(tmp_path.iterdir())


def test_empty_phi_names_the_field(tmp_path, capsys):
    _, _, err = _run(capsys, ["verify", "ball-poincare", "--n", "2", "--p", "0.5", "--phi", "",
                              "--out", str(tmp_path)])
    assert "phi" in err


def test_bad_thread_count(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("BM_LAB_THREADS", "many")
    code, _, err = _run(capsys, ["verify", "ball-poincare", "--n", "2", "--p", "0.5", "--phi", "l2:1.0",
                                 "--out", str(tmp_path)])
    assert code == 2
    assert "BM_LAB_THREADS" in err


def test_item_error_recorded_and_batch_continues(tmp_path, capsys):
    # nonzero mean is rejected by the eigenvalue verifier; the second item still runs
    code, lines, _ = _run(capsys, ["verify", "eigen-ball", "--n", "2", "--phi", "l0:1.0;l2:1.0",
                                   "--phi", "l2:1.0", "--out", str(tmp_path)])
    assert code == 1
    assert "error: ResonanceError" in lines[0]
    assert "pass" in lines[1]
    assert lines[-1] == "SUMMARY pass=1 fail=1 inconclusive=0"
    doc = json.loads(next(tmp_path.glob("*.json")).read_text())
    assert doc["items"][0]["verdict"] == "error"


def test_thread_count_does_not_change_output(monkeypatch):
    argv = ["verify", "ball-poincare", "--n", "3", "--p", "0.5", "--random", "6", "--seed", "3"]
    monkeypatch.setenv("BM_LAB_THREADS", "1")
    a = run_command(argv)[0]
    monkeypatch.setenv("BM_LAB_THREADS", "4")
    b = run_command(argv)[0]
    assert a == b
    assert len(json.loads(a)["items"]) == 6


def test_seed_changes_random_inputs():
    base = ["verify", "ball-poincare-log", "--n", "2", "--random", "2"]
    a = json.loads(run_command(base + ["--seed", "1"])[0])
    b = json.loads(run_command(base + ["--seed", "2"])[0])
    assert a["items"][0]["params"]["phi"] != b["items"][0]["params"]["phi"]


def test_report_is_reexecutable_from_config():
    argv = ["verify", "capacity-ball", "--n", "3", "--p", "1.5", "--random", "2", "--seed", "5"]
    doc = json.loads(run_command(argv)[0])
    phis = [it["params"]["psi"] for it in doc["items"]]
    again = ["verify", "capacity-ball", "--n", "3", "--p", "1.5"]
    for phi in phis:
        again += ["--phi", phi]
    redo = json.loads(run_command(again)[0])
    assert [it["margin"] for it in redo["items"]] == [it["margin"] for it in doc["items"]]


def test_figures_opt_in(tmp_path, capsys):
    argv = ["scan", "bm", "--n", "2", "--p", "0.5", "--phi", "l2:1.0", "--pairs", "2",
            "--refinement", "1"]
    _run(capsys, argv + ["--out", str(tmp_path / "plain")])
    assert not list((tmp_path / "plain").glob("*.png"))
    _run(capsys, argv + ["--out", str(tmp_path / "fig"), "--figures"])
    pngs = list((tmp_path / "fig").glob("*.png"))
    assert pngs
    assert all(p.read_bytes()[:4] == b"\x89PNG" for p in pngs)


def test_check_variational(tmp_path, capsys):
    code, lines, _ = _run(capsys, ["check", "variational", "--p", "1", "--phi", "l0:1.0",
                                   "--refinement", "2", "--out", str(tmp_path)])
    assert code == 0
    assert "gap1=" in lines[0]
    doc = json.loads(next(tmp_path.glob("*.json")).read_text())
    item = doc["items"][0]
    assert item["gap_first"] < 1e-2 and item["gap_second"] < 5e-2


def test_general_body_on_ellipse(tmp_path, capsys):
    code, lines, _ = _run(capsys, ["verify", "poincare-general", "--n", "2", "--p", "2", "--phi", "l2:1.0",
                                   "--body", "ellipse:1.3,1.0", "--refinement", "2", "--out", str(tmp_path)])
    assert code == 0
    assert lines[-1] == "SUMMARY pass=1 fail=0 inconclusive=0"
