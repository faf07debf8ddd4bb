import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nbspectra.harness import (ConfigError, Experiment, ExperimentConfig, TrialRecord,
                               emit_report, experiment_bai_yin, experiment_rho_b,
                               experiment_trace_growth, grid_points, run_trials, split_seed,
                               summarize)

TREE_P = [[0.5, 0.5, 0.5], [0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]]


def cfg(**kw):
    base = {"experiment": "rho_b", "trials": 2, "seed": 5, "grid": {"n": [12], "m": [6], "p": [0.4]}}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


@pytest.mark.parametrize("doc", [
    {"experiment": "rho_b", "trials": 0, "grid": {"n": [4], "m": [2], "p": [0.5]}},
    {"experiment": "rho_b", "trials": 1, "grid": {}},
    {"experiment": "rho_b", "trials": 1, "grid": {"n": []}},
    {"experiment": "nope", "trials": 1, "grid": {"n": [4]}},
    {"experiment": "rho_b", "grid": {"n": [4]}, "bogus": 1},
    {"trials": 1, "grid": {"n": [4]}},
])
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_invalid_grid_fails_before_trials():
    c = cfg(grid={"n": [4], "m": [2], "p": [1.5]})
    with pytest.raises(ConfigError):
        run_trials(c)
    with pytest.raises(ConfigError):
        run_trials(cfg(grid={"n": [4], "p": [0.5]}))


def test_grid_points_derivations():
    pts = grid_points(cfg(grid={"n": [100, 200], "y": [0.25], "d": [20], "eps": [0.1, 0.3]}))
    assert [(p["n"], p["m"], p["p"]) for p in pts] == [(100, 25, 0.2), (200, 50, 0.1)]
    assert cfg(grid={"n": [100], "y": [0.25], "d": [20], "eps": [0.1, 0.3]}).probe_options()["eps"] == [0.1, 0.3]


def test_split_seed_depends_only_on_seed_and_trial():
    assert split_seed(1, 3) == split_seed(1, 3)
    assert len({split_seed(1, t) for t in range(100)}) == 100
    assert split_seed(1, 3) != split_seed(2, 3)
    assert 0 <= split_seed(2 ** 64 - 1, 0) < 2 ** 63


def _content(records):
    return [(r.trial_id, r.grid_index, r.seed_used, r.status, r.point, r.metrics, r.error)
            for r in records]


def test_single_trial_rerun_identical():
    a = run_trials(cfg(trials=1))
    b = run_trials(cfg(trials=1))
    assert len(a) == 1 and _content(a) == _content(b)
    assert a[0].seed_used == split_seed(5, 0)


def test_parallelism_does_not_change_records():
    serial = run_trials(cfg(trials=8, parallelism=1))
    parallel = run_trials(cfg(trials=8, parallelism=8))
    assert _content(serial) == _content(parallel)
    assert [r.trial_id for r in parallel] == list(range(8))


def test_thread_env_overrides(monkeypatch):
    monkeypatch.setenv("NBSPECTRA_THREADS", "3")
    assert cfg(parallelism=1).effective_parallelism() == 3
    monkeypatch.setenv("NBSPECTRA_THREADS", "x")
    with pytest.raises(ConfigError):
        cfg().effective_parallelism()


def test_failed_trials_are_recorded():
    c = ExperimentConfig.from_dict({"experiment": "bai_yin", "trials": 3,
                                    "grid": {"n": [4], "m": [2], "q": [3.0], "s": [0.5],
                                             "model": ["bounded_general"]}})
    recs = run_trials(c)
    assert len(recs) == 3
    assert all(r.status == "failed" and "infeasible" in r.error for r in recs)
    row = summarize(recs, Experiment.BAI_YIN)[0][0]
    assert row["n_failed"] == 3 and row["n_ok"] == 0


def test_bai_yin_all_ones_is_zero():
    c = ExperimentConfig.from_dict({"experiment": "bai_yin", "trials": 2,
                                    "grid": {"n": [6], "m": [3], "p": [1.0]}})
    _, summary = experiment_bai_yin(c)
    row = summary[0][0]
    assert row["sigma_max_sqrt_d_mean"] == 0.0 and row["sigma_min_sqrt_d_mean"] == 0.0


def test_experiment_kind_mismatch():
    with pytest.raises(ConfigError):
        experiment_bai_yin(cfg())


def test_rho_b_forest_profile_gives_zero():
    c = ExperimentConfig.from_dict({"experiment": "rho_b", "trials": 6, "seed": 1,
                                    "profile": {"n": 4, "m": 3, "p": TREE_P}})
    recs, summary = experiment_rho_b(c)
    assert summary[0][0]["n_zero"] == 6
    assert all(r.metrics["rho_b"] == 0.0 for r in recs)


def test_rho_b_exceedance_monotone_in_eps():
    c = ExperimentConfig.from_dict({"experiment": "rho_b", "trials": 12, "seed": 2,
                                    "grid": {"n": [40], "m": [10], "p": [0.3],
                                             "eps": [0.0, 0.1, 0.3, 0.5]}})
    _, summary = experiment_rho_b(c)
    row = summary[0][0]
    freqs = [row[f"exceed_eps_{e}"] for e in (0.0, 0.1, 0.3, 0.5)]
    assert all(a >= b for a, b in zip(freqs, freqs[1:]))
    assert row["n_not_converged"] == 0


def test_trace_growth_zero_matrix():
    c = ExperimentConfig.from_dict({"experiment": "trace_growth", "trials": 1,
                                    "grid": {"n": [5], "m": [3], "p": [1.0], "l": [1, 2, 3, 4]}})
    recs, summary = experiment_trace_growth(c)
    assert [recs[0].metrics[f"F_{l}"] for l in range(1, 5)] == [0.0] * 4
    assert all(r["F_mean"] == 0.0 for r in summary[0])


def test_trace_growth_four_cycle():
    c = ExperimentConfig.from_dict({"experiment": "trace_growth", "trials": 1,
                                    "profile": {"n": 2, "m": 2, "matrix": [[1, 1], [1, 1]]},
                                    "grid": {"l": [1, 2, 3, 4, 5, 6]}})
    _, summary = experiment_trace_growth(c)
    rows = summary[0]
    assert [r["F_mean"] for r in rows] == [8.0] * 6
    assert all(r["r_median"] == 1.0 for r in rows[1:])


def test_trace_growth_truncates_on_budget(caplog):
    c = ExperimentConfig.from_dict({"experiment": "trace_growth", "trials": 1,
                                    "grid": {"n": [6], "m": [4], "p": [0.5], "l": [6]},
                                    "options": {"trace_budget": 1e4}})
    recs = run_trials(c)
    # 48 edges: l = 6 and l = 5 exceed the budget, l = 4 (48^2 * 4 = 9216) fits
    assert recs[0].ok and recs[0].metrics["l_max"] == 4
    assert "truncating" in caplog.text


def test_emit_empty_records(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)


def test_emit_byte_identical(tmp_path):
    c = ExperimentConfig.from_dict({"experiment": "bai_yin", "trials": 4, "seed": 9,
                                    "grid": {"n": [20, 30], "m": [10], "p": [0.3]}})
    recs = run_trials(c)
    a = emit_report(recs, tmp_path / "a", experiment="bai_yin")
    b = emit_report(list(reversed(recs)), tmp_path / "b", experiment="bai_yin")
    assert [p.name for p in a] == ["trials.csv", "summary_g000.csv", "summary_g001.csv"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    ja = emit_report(recs, tmp_path / "ja", fmt="json", experiment="bai_yin")
    jb = emit_report(recs, tmp_path / "jb", fmt="json", experiment="bai_yin")
    assert all(x.read_bytes() == y.read_bytes() for x, y in zip(ja, jb))
    assert json.loads(ja[0].read_text())[0]["trial_id"] == 0


def test_emit_timing_optional(tmp_path):
    recs = run_trials(cfg(trials=1))
    header = emit_report(recs, tmp_path / "t", include_timing=True)[0].read_text().splitlines()[0]
    assert header.endswith("elapsed")
    assert "elapsed" not in emit_report(recs, tmp_path / "u")[0].read_text()


def test_emit_io_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report(run_trials(cfg(trials=1)), blocker / "sub")


def test_bai_yin_summary_schema_and_recomputation(tmp_path):
    c = ExperimentConfig.from_dict({"experiment": "bai_yin", "trials": 20, "seed": 4,
                                    "grid": {"n": [80], "y": [0.25], "d": [10]}})
    recs, _ = experiment_bai_yin(c)
    files = emit_report(recs, tmp_path, experiment="bai_yin")
    summary = list(csv.DictReader(files[1].open()))[0]
    assert {"mp_lower", "mp_upper"} <= set(summary)
    assert float(summary["mp_upper"]) == pytest.approx(1.5)
    trials = list(csv.DictReader(files[0].open()))
    assert len(trials) == 20
    smax = np.array([float(r["sigma_max_sqrt_d"]) for r in trials])
    smin = np.array([float(r["sigma_min_sqrt_d"]) for r in trials])
    for name, vals in [("sigma_max_sqrt_d", smax), ("sigma_min_sqrt_d", smin)]:
        assert abs(float(summary[f"{name}_mean"]) - vals.mean()) <= 1e-12
        assert abs(float(summary[f"{name}_median"]) - np.median(vals)) <= 1e-12
        assert abs(float(summary[f"{name}_q05"]) - np.quantile(vals, 0.05)) <= 1e-12
        assert abs(float(summary[f"{name}_q95"]) - np.quantile(vals, 0.95)) <= 1e-12


def test_records_carry_provenance():
    rec = run_trials(cfg(trials=1))[0]
    assert isinstance(rec, TrialRecord)
    assert rec.point == {"n": 12, "m": 6, "p": 0.4}
    assert rec.metrics["gamma"] == pytest.approx(0.5)


def test_ihara_fuzz_and_bounds_run():
    recs = run_trials(ExperimentConfig.from_dict({"experiment": "ihara_fuzz", "trials": 4}))
    row = summarize(recs, "ihara_fuzz")[0][0]
    assert row["root_violations"] == row["probe_violations"] == row["block_violations"] == 0
    c = ExperimentConfig.from_dict({"experiment": "bound_tightness", "trials": 3,
                                    "grid": {"n": [60], "m": [15], "d": [20]}})
    row = summarize(run_trials(c), "bound_tightness")[0][0]
    assert row["upper_violations"] == row["rescaled_violations"] == row["lower_violations"] == 0
