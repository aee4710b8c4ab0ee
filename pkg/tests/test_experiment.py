import json

import pytest

from mmcover import experiment
from mmcover.errors import GuardError, InvariantViolation
from mmcover.experiment import COLUMNS, approximation_ratio, ratio_bound, run_experiment
from mmcover.instance_io import ExperimentConfig, instance_from_dict


def test_ratio_helpers():
    assert approximation_ratio(0.0, 0.0) == 1.0
    assert approximation_ratio(3.0, 2.0) == 1.5
    assert approximation_ratio(1.0, 0.0) == float("inf")
    assert ratio_bound("uniform", 1.0) == 216.0
    assert ratio_bound("nonuniform", 2.0) == 2 * 144**2
    assert ratio_bound("tmmc", 1.0) == 2160.0


def test_zero_trials():
    rep = run_experiment(ExperimentConfig(trials=0))
    assert rep.rows == () and rep.max_ratio is None
    assert rep.aggregates() == {}
    assert rep.to_csv().strip() == ",".join(COLUMNS)


def test_guard_fires_before_solving(monkeypatch):
    def boom(*a, **kw):
        raise AssertionError("solver ran")

    monkeypatch.setattr(experiment, "solve_mmc", boom)
    monkeypatch.setattr(experiment, "exact_mmc", boom)
    cfg = ExperimentConfig(trials=3, clients=(12, 12), servers=(15, 15), demands=(4, 4), modes=("uniform",))
    with pytest.raises(GuardError) as err:
        run_experiment(cfg)
    assert err.value.count > cfg.oracle_guard


def test_rows_pass_and_are_sorted():
    cfg = ExperimentConfig(trials=6, seed=2, clients=(2, 5), servers=(2, 6), subroutines=("greedy", "exact"))
    rep = run_experiment(cfg)
    assert len(rep.rows) == 6 * 3 * 2
    assert [r["trial"] for r in rep.rows] == sorted(r["trial"] for r in rep.rows)
    for r in rep.rows:
        assert set(r) == set(COLUMNS)
        assert r["ratio"] <= r["bound"]
        assert r["solver_cost"] >= r["oracle_cost"] * (1 - 1e-9) - 1e-12
        assert all(r[c] for c in ("family_ok", "audit_ok", "bundle_ok", "hosting_ok", "ratio_ok"))
    assert set(rep.aggregates()) == {f"{m}/{s}" for m in ("nonuniform", "tmmc", "uniform") for s in ("exact", "greedy")}


def test_byte_identical_reports(tmp_path):
    cfg = ExperimentConfig(trials=5, seed=11, family="graph", clients=(2, 5), servers=(2, 6))
    a = run_experiment(cfg).write(tmp_path / "a")
    b = run_experiment(cfg).write(tmp_path / "b")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_timing_columns_optional(tmp_path):
    rep = run_experiment(ExperimentConfig(trials=1, seed=1, clients=(2, 3), servers=(2, 3)))
    assert "runtime" not in rep.to_csv().splitlines()[0]
    assert rep.to_csv(timing=True).splitlines()[0].endswith(",runtime")
    assert all("runtime" in r for r in rep.to_json(timing=True)["rows"])


def test_failure_dumps_instance(tmp_path, monkeypatch):
    monkeypatch.setattr(experiment, "ratio_bound", lambda mode, alpha: 0.5)
    cfg = ExperimentConfig(trials=2, seed=4, clients=(2, 3), servers=(2, 3), modes=("uniform",))
    with pytest.raises(InvariantViolation) as err:
        run_experiment(cfg, dump_dir=tmp_path)
    assert "ratio" in str(err.value)
    dumped = tmp_path / "failed_trial_0.json"
    doc = json.loads(dumped.read_text())
    instance_from_dict(doc)
    assert doc["meta"]["trial"] == 0
