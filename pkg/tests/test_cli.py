import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from quditkd import cli, gf_algebra
from quditkd.pauli_channel import distribution_to_json, make_distribution


def run(argv):
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


def read_csv(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def read_meta_csv(path):
    first = path.read_text().splitlines()[0]
    assert first.startswith("# metadata: ")
    return json.loads(first[len("# metadata: ") :])


def test_thresholds_single_row(tmp_path):
    out = tmp_path / "t.csv"
    assert run(["thresholds", "--d-max", "2", "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert int(row["d"]) == 2
    assert float(row["D_th"]) == 0.25
    assert float(row["D_2CC"]) == pytest.approx(0.2, abs=1e-12)
    assert float(row["delta"]) == pytest.approx(0.05, abs=1e-12)


def test_thresholds_primes_and_formats(tmp_path):
    out_csv, out_json = tmp_path / "t.csv", tmp_path / "t.json"
    assert run(["thresholds", "--d-max", "100", "--primes-only", "--out", str(out_csv)]) == 0
    assert run(["thresholds", "--d-max", "100", "--primes-only", "--format", "json", "--out", str(out_json)]) == 0
    rows = read_csv(out_csv)
    assert len(rows) == 25
    d2cc = [float(r["D_2CC"]) for r in rows]
    assert all(b > a for a, b in zip(d2cc, d2cc[1:]))
    doc = json.loads(out_json.read_text())
    assert isinstance(doc["rows"], list)
    for a, b in zip(rows, doc["rows"]):
        assert {k: float(v) for k, v in a.items()} == {k: float(v) for k, v in b.items()}
    for meta in (read_meta_csv(out_csv), doc["metadata"]):
        assert meta["version"] and meta["rng"]["generator"] and "runtime_seconds" in meta
        assert meta["config"] == {"d_max": 100, "primes_only": True, "format": meta["config"]["format"]}


def test_thresholds_invalid_flags(tmp_path):
    out = tmp_path / "t.csv"
    assert run(["thresholds", "--d-max", "1", "--out", str(out)]) == 2
    assert run(["thresholds", "--d-max", "x"]) == 2
    assert run(["thresholds", "--d-max", "5", "--format", "xml"]) == 2
    assert not out.exists()


def test_evolve_isotropic_feasible_from_round_four(tmp_path):
    out = tmp_path / "e.json"
    assert run(["evolve", "--isotropic", "2,0.15,0", "--k", "6", "--epsilon", "0.01", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    flags = [row["feasible"] for row in doc["rows"]]
    assert flags == [False] * 4 + [True] * 3
    assert doc["metadata"]["k_c"] == pytest.approx(3.148, abs=1e-3)
    assert doc["metadata"]["config"]["epsilon"] == 0.01


def test_evolve_infeasible_channel_rows(tmp_path):
    out = tmp_path / "e.csv"
    assert run(["evolve", "--isotropic", "2,0.22,0", "--k", "20", "--format", "csv", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 21 and all(r["feasible"] == "false" for r in rows)
    assert read_meta_csv(out)["k_c"] is None


def test_evolve_perfect_depolarizing(tmp_path):
    out = tmp_path / "e.csv"
    assert run(["evolve", "--depolarizing", "2,0", "--k", "3", "--format", "csv", "--out", str(out)]) == 0
    for row in read_csv(out):
        assert float(row["R_D"]) == 0.0 and float(row["R_P"]) == 0.0


def test_evolve_dist_file_csv_and_json_agree(tmp_path):
    src = tmp_path / "dist.json"
    src.write_text(distribution_to_json(make_distribution(3, np.full((3, 3), 0.02) + np.eye(3)[0][:, None] * np.eye(3)[0] * 0.82)))
    a, b = tmp_path / "a.csv", tmp_path / "b.json"
    assert run(["evolve", "--dist", str(src), "--k", "4", "--format", "csv", "--out", str(a)]) == 0
    assert run(["evolve", "--dist", str(src), "--k", "4", "--format", "json", "--out", str(b)]) == 0
    rows_csv = read_csv(a)
    rows_json = json.loads(b.read_text())["rows"]
    for rc, rj in zip(rows_csv, rows_json):
        assert float(rc["R_D"]) == rj["R_D"]
        assert [float(rc[f"q_{i}"]) for i in range(3)] == rj["q"]
        assert int(rc["r"]) == rj["r"]


def test_evolve_exit_codes(tmp_path):
    assert run(["evolve", "--isotropic", "4,0.1,0"]) == 3
    assert run(["evolve", "--isotropic", "2,0.9,0"]) == 3
    assert run(["evolve", "--isotropic", "3,0.1,0.2"]) == 3
    assert run(["evolve", "--isotropic", "2,0.1"]) == 2
    assert run(["evolve", "--k", "3"]) == 2
    assert run(["evolve", "--isotropic", "2,0.1,0", "--depolarizing", "2,0.1"]) == 2
    src = tmp_path / "bad.json"
    src.write_text(json.dumps({"d": 2, "p": [[0.5, 0.1], [0.1, 0.1]]}))
    assert run(["evolve", "--dist", str(src)]) == 3


def test_evolve_precision_loss_exit(tmp_path):
    src = tmp_path / "flat.json"
    delta = 5e-16
    src.write_text(json.dumps({"d": 2, "p": [[0.5 + delta, 0.0], [0.5 - delta, 0.0]]}))
    out = tmp_path / "e.json"
    assert run(["evolve", "--dist", str(src), "--k", "40", "--out", str(out)]) == 4
    assert not out.exists()


def _sim(tmp_path, name, *extra):
    out = tmp_path / name
    code = run(["simulate", "--out", str(out), *extra])
    return code, out


def test_simulate_abort_exit_codes(tmp_path):
    code, out = _sim(tmp_path, "a.json", "--isotropic", "3,0.32,0", "--n-pairs", "100000", "--seed", "1")
    assert code == 6
    assert json.loads(out.read_text())["report"]["abort_reason"] == "NeverFeasible"
    code, _ = _sim(tmp_path, "b.json", "--isotropic", "2,0.3,0", "--n-pairs", "100000", "--threshold", "0.25")
    assert code == 5
    code, _ = _sim(tmp_path, "c.json", "--isotropic", "2,0.15,0", "--n-pairs", "20000", "--epsilon", "0.05")
    assert code == 7


def test_simulate_invalid_configs(tmp_path):
    assert _sim(tmp_path, "x.json", "--isotropic", "2,0.1,0")[0] == 2
    assert _sim(tmp_path, "x.json", "--isotropic", "2,0.1,0", "--n-pairs", "3")[0] == 2
    assert _sim(tmp_path, "x.json", "--n-pairs", "30")[0] == 2
    assert _sim(tmp_path, "x.json", "--isotropic", "2,0.1,0", "--n-pairs", "30", "--epsilon", "2")[0] == 2


def test_simulate_config_file_and_transcript(tmp_path):
    cfg = {
        "d": 2,
        "dist": [[0.8, 0.1], [0.1, 0.0]],
        "n_pairs": 200000,
        "epsilon": 0.1,
        "seed": 5,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    tr = tmp_path / "tr.txt"
    code, out = _sim(tmp_path, "r.json", "--config", str(path), "--transcript", str(tr))
    assert code == 0
    doc = json.loads(out.read_text())
    resolved = doc["metadata"]["config"]
    assert resolved["threshold"] == 0.25 and resolved["eta_accounting"] == "all_r"
    assert resolved["seed"] == 5
    lines = tr.read_text().splitlines()
    assert lines[0] == "round,stage,pairs_in,pairs_out,empirical_RD,empirical_RP"
    assert lines[-1].split(",")[1] == "pec"
    timing = json.loads((tmp_path / "r.json.timing.json").read_text())
    assert timing["runtime_seconds"] >= 0


def test_simulate_is_byte_identical(tmp_path):
    args = ["--isotropic", "2,0.1,0", "--n-pairs", "300000", "--epsilon", "0.1", "--seed", "42"]
    _, a = _sim(tmp_path, "a.json", *args)
    _, b = _sim(tmp_path, "b.json", *args)
    assert a.read_bytes() == b.read_bytes()


def test_atomic_write_leaves_nothing_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.txt"

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        cli.atomic_write(target, "data")
    assert list(tmp_path.iterdir()) == []


def test_selftest_fast_passes(capsys):
    assert run(["selftest", "--level", "fast"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_selftest_detects_corrupted_roots(monkeypatch, capsys):
    good = gf_algebra.roots_of_unity

    def corrupted(d):
        table = np.array(good(d))
        table[1] *= np.exp(1e-6j)
        return table

    monkeypatch.setattr(gf_algebra, "roots_of_unity", corrupted)
    assert run(["selftest", "--level", "fast"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "quditkd", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "quditkd" in proc.stdout
