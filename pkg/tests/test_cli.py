import csv
import json
from pathlib import Path

from hcbf.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _without_timing(rows):
    return [{k: v for k, v in r.items() if k != "solve_us"} for r in rows]


def test_run_writes_outputs(tmp_path):
    assert main(["run", "--config", str(FIXTURES / "easy_short.json"), "--out", str(tmp_path)]) == 0
    steps = _rows(tmp_path / "steps.csv")
    assert len(steps) == 50
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["seed"] == 3 and metrics["ticks"] == 50
    assert (tmp_path / "config.json").exists()


def test_bad_config_exits_1(tmp_path, capsys):
    assert main(["run", "--config", str(FIXTURES / "bad_gamma.json"), "--out", str(tmp_path)]) == 1
    assert "obstacles[0].gamma" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1


def test_strict_squeeze_exits_2(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", str(FIXTURES / "strict_squeeze.json"), "--out", str(out), "--dump-qp"]) == 2
    steps = _rows(out / "steps.csv")
    assert steps[0]["status"] == "Emergency"
    assert list((out / "qp").glob("qp_tick*.txt"))


def test_config_echo_reproduces_run(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(FIXTURES / "easy_short.json"), "--out", str(a)]) == 0
    assert main(["run", "--config", str(a / "config.json"), "--out", str(b)]) == 0
    assert _without_timing(_rows(a / "steps.csv")) == _without_timing(_rows(b / "steps.csv"))
    assert (a / "metrics.json").read_text() == (b / "metrics.json").read_text()


def test_batch_deterministic_and_consistent_with_run(tmp_path):
    cfg = str(FIXTURES / "easy_short.json")
    for d in ("b1", "b2"):
        assert main(["batch", "--config", cfg, "--seeds", "2", "--workers", "1", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "b1/batch.csv").read_text() == (tmp_path / "b2/batch.csv").read_text()
    rows = _rows(tmp_path / "b1/batch.csv")
    assert [r["seed"] for r in rows] == ["0", "1"]

    assert main(["batch", "--config", cfg, "--seeds", "1", "--out", str(tmp_path / "one")]) == 0
    assert main(["run", "--config", cfg, "--seed", "0", "--out", str(tmp_path / "run")]) == 0
    row = _rows(tmp_path / "one/batch.csv")[0]
    m = json.loads((tmp_path / "run/metrics.json").read_text())
    assert float(row["rmse"]) == m["rmse"]
    for oid in ("red", "blue", "green"):
        assert float(row[f"d_min_{oid}"]) == m["d_min"][oid]


def test_batch_parallel_matches_serial(tmp_path):
    cfg = str(FIXTURES / "easy_short.json")
    assert main(["batch", "--config", cfg, "--seeds", "3", "--workers", "1", "--out", str(tmp_path / "s")]) == 0
    assert main(["batch", "--config", cfg, "--seeds", "3", "--workers", "2", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "s/batch.csv").read_text() == (tmp_path / "p/batch.csv").read_text()


def test_sweep_beta(tmp_path):
    cfg = str(FIXTURES / "easy_short.json")
    assert main(["sweep-beta", "--config", cfg, "--betas", "", "--out", str(tmp_path)]) == 1
    assert main(["sweep-beta", "--config", cfg, "--betas", "10,100,1000", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert [float(r["beta"]) for r in rows] == [10.0, 100.0, 1000.0]
    d = [float(r["delta_max"]) for r in rows]
    assert all(b <= a + 1e-8 for a, b in zip(d, d[1:]))


def test_coverage(tmp_path, capsys):
    cfg = tmp_path / "cov.json"
    cfg.write_text(json.dumps({"preset": "hard", "coverage": {"kind": "squeeze"}}))
    assert main(["coverage", "--config", str(cfg), "--samples", "0", "--out", str(tmp_path)]) == 1
    assert main(["coverage", "--config", str(cfg), "--samples", "300", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "coverage.csv")
    assert rows
    assert all(r["strict_status"] == "Infeasible" and r["relaxed_status"] == "Optimal" for r in rows)
    far = tmp_path / "far.json"
    far.write_text(json.dumps({"preset": "hard", "coverage": {"kind": "far"}}))
    assert main(["coverage", "--config", str(far), "--samples", "200", "--out", str(tmp_path / "f")]) == 0
    assert _rows(tmp_path / "f/coverage.csv") == []
