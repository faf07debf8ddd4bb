import csv
import json

import numpy as np
import pytest

from nbspectra.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_IO, EXIT_OK, main


def write(tmp_path, doc, name="c.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


def test_sample_and_stats(tmp_path, capsys):
    conf = write(tmp_path, {"n": 4, "m": 2, "model_kind": "bipartite_bernoulli", "p": 0.5, "seed": 3})
    assert main(["sample", "--config", conf, "--out", str(tmp_path / "o")]) == EXIT_OK
    lines = (tmp_path / "o" / "matrix.csv").read_text().splitlines()
    assert lines[0] == "i,j,value" and len(lines) == 9
    meta = json.loads((tmp_path / "o" / "sample.json").read_text())
    assert meta["seed"] == 3
    assert main(["sample", "--config", conf, "--out", str(tmp_path / "o2"), "--seed", "3"]) == EXIT_OK
    assert (tmp_path / "o2" / "matrix.csv").read_bytes() == (tmp_path / "o" / "matrix.csv").read_bytes()
    assert main(["stats", "--config", conf, "--out", str(tmp_path / "s")]) == EXIT_OK
    stats = json.loads((tmp_path / "s" / "stats.json").read_text())
    assert stats["d"] == 2.0 and stats["gamma"] == 0.5


def test_sample_bounded_profile(tmp_path):
    conf = write(tmp_path, {"profile": {"n": 3, "m": 3, "model_kind": "bounded_general", "p": 0.04, "q": 5}})
    assert main(["sample", "--config", conf, "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "o" / "matrix.csv").open()))
    assert all(abs(float(r["value"])) == pytest.approx(0.2) for r in rows)


def test_experiment_overrides_and_outputs(tmp_path):
    conf = write(tmp_path, {"grid": {"n": [30], "m": [10], "p": [0.3]}, "trials": 1})
    out = tmp_path / "r"
    code = main(["rho-b", "--config", conf, "--trials", "3", "--seed", "7", "--out", str(out),
                 "--parallelism", "2"])
    assert code == EXIT_OK
    rows = list(csv.DictReader((out / "trials.csv").open()))
    assert len(rows) == 3
    assert (out / "summary_g000.csv").exists()


def test_json_format(tmp_path):
    conf = write(tmp_path, {"grid": {"n": [10], "m": [5], "p": [0.5]}, "trials": 2})
    assert main(["bai-yin", "--config", conf, "--out", str(tmp_path / "j"), "--format", "json"]) == EXIT_OK
    assert len(json.loads((tmp_path / "j" / "trials.json").read_text())) == 2


@pytest.mark.parametrize("doc", [
    "{not json",
    {"grid": {"n": [4], "m": [2], "p": [0.5]}, "trials": 0},
    {"experiment": "bai_yin", "grid": {"n": [4], "m": [2], "p": [0.5]}},
    {"grid": {"n": [4], "m": [2], "p": [2.0]}},
    [1, 2],
])
def test_config_errors_exit_1(tmp_path, doc):
    assert main(["rho-b", "--config", write(tmp_path, doc), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_invalid_profile_exit_1(tmp_path):
    conf = write(tmp_path, {"n": 3, "m": 2, "p": 1.5})
    assert main(["stats", "--config", conf, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["sample", "--config", write(tmp_path, {"m": 2}, "b.json")]) == EXIT_CONFIG


def test_assertion_failure_exit_2(tmp_path):
    conf = write(tmp_path, {"grid": {"n": [10], "m": [5], "p": [0.5]}, "trials": 2,
                            "tolerances": {"edge_abs": 1e-9}})
    assert main(["bai-yin", "--config", conf, "--out", str(tmp_path / "o")]) == EXIT_ASSERT


def test_ihara_check_passes(tmp_path):
    conf = write(tmp_path, {"trials": 5, "seed": 2})
    assert main(["ihara-check", "--config", conf, "--out", str(tmp_path / "o")]) == EXIT_OK


def test_io_errors_exit_3(tmp_path):
    assert main(["rho-b", "--config", str(tmp_path / "missing.json")]) == EXIT_IO
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    conf = write(tmp_path, {"grid": {"n": [6], "m": [3], "p": [0.5]}})
    assert main(["rho-b", "--config", conf, "--out", str(blocker / "out")]) == EXIT_IO


def test_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NBSPECTRA_THREADS", "2")
    conf = write(tmp_path, {"grid": {"n": [8], "m": [4], "p": [0.5]}, "trials": 2})
    assert main(["rho-b", "--config", conf, "--out", str(tmp_path / "a")]) == EXIT_OK
    monkeypatch.delenv("NBSPECTRA_THREADS")
    assert main(["rho-b", "--config", conf, "--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "trials.csv").read_bytes() == (tmp_path / "b" / "trials.csv").read_bytes()
