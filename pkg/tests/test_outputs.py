import json

import pytest

from snowball_sim.engine import (ExperimentConfig, ExperimentResult, MetricsRecord, RoundRecord,
                                 run_experiment)
from snowball_sim.outputs import CSV_HEADER, read_rounds_csv, write_outputs


def tiny_result(t_rounds=3):
    cfg = ExperimentConfig(n_clients=6, k_participants=4, t_rounds=t_rounds, e_local=1,
                           n_train=240, n_test=80, n_features=12, n_classes=2, trigger_len=3,
                           trigger_parts=3, m_initial=2, m_final=3, t_topdown=1,
                           vae_epochs_init=4, vae_epochs_tune=1, vae_hidden=6, vae_latent=3,
                           defense="fedavg", seed=1)
    return run_experiment(cfg)


def test_empty_run_writes_header_only(tmp_path):
    cfg = ExperimentConfig(n_clients=6, k_participants=4, t_rounds=0, t_topdown=-1,
                           n_train=240, n_test=80, n_features=12, n_classes=2,
                           trigger_len=3, m_initial=2, m_final=3)
    result = run_experiment(cfg)
    paths = write_outputs(result, tmp_path)
    assert paths["rounds"].read_text() == CSV_HEADER + "\n"
    assert paths["audit"].read_text() == ""


def test_rounds_csv_round_trip(tmp_path):
    result = tiny_result()
    paths = write_outputs(result, tmp_path)
    rows = read_rounds_csv(paths["rounds"])
    assert len(rows) == len(result.records)
    for row, rec in zip(rows, result.records):
        assert row["round"] == rec.round
        assert row["ma"] == pytest.approx(rec.metrics.ma, abs=1e-6)
        assert row["ba"] == pytest.approx(rec.metrics.ba, abs=1e-6)
        assert row["fpr"] == pytest.approx(rec.metrics.fpr, abs=1e-6)
        assert row["fnr"] == pytest.approx(rec.metrics.fnr, abs=1e-6)
        assert row["n_selected"] == rec.metrics.n_selected
        assert row["n_infected_selected"] == rec.metrics.n_infected_selected
        assert row["wallclock_ms"] == 0.0  # deterministic placeholder column


def test_identical_runs_byte_identical_csv(tmp_path):
    a = write_outputs(tiny_result(), tmp_path / "a")["rounds"].read_bytes()
    b = write_outputs(tiny_result(), tmp_path / "b")["rounds"].read_bytes()
    assert a == b
    assert b"\r" not in a  # LF line endings


def test_audit_jsonl_carries_timing_and_elections(tmp_path):
    result = tiny_result()
    paths = write_outputs(result, tmp_path)
    lines = paths["audit"].read_text().splitlines()
    assert len(lines) == len(result.records)
    for line, rec in zip(lines, result.records):
        entry = json.loads(line)
        assert entry["round"] == rec.round
        assert entry["wallclock_ms"] > 0.0
        assert entry["participants"] == rec.participants
        assert entry["selectees"] == rec.selectees


def test_summary_json_echoes_config_and_manifest(tmp_path):
    result = tiny_result()
    paths = write_outputs(result, tmp_path)
    summary = json.loads(paths["summary"].read_text())
    assert summary["ma"] == result.summary["ma"]
    assert summary["ba"] == result.summary["ba"]
    assert summary["config"]["seed"] == 1
    assert summary["config"]["defense"] == "fedavg"
    assert summary["manifest"]["wallclock_ms_total"] > 0
    assert set(summary["manifest"]["artifacts"]) == {"rounds", "summary", "audit"}
