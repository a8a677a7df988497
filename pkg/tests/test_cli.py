import csv
import io
import json

import jsonschema
import pytest

from mpstomo.cli import load_schema, main


def run_cli(tmp_path, *argv):
    out = tmp_path / "out.jsonl"
    code = main([*argv, "--out", str(out)])
    text = out.read_text() if out.exists() else ""
    return code, text


def records_of(text):
    return [json.loads(line) for line in text.splitlines()]


def validate(records):
    schema = load_schema()
    for r in records:
        jsonschema.validate(r, schema)


def strip_metrics(records):
    return [{k: v for k, v in r.items() if k != "metrics"} for r in records]


def test_run_random_mps(tmp_path):
    code, text = run_cli(tmp_path, "run", "--family", "random_mps", "--n", "8", "--chi", "2", "--trials", "3", "--seed", "5")
    assert code == 0
    recs = records_of(text)
    validate(recs)
    assert [r["type"] for r in recs] == ["header", "trial", "trial", "trial", "summary"]
    assert recs[-1]["min_fidelity"] >= 1 - 1e-9
    assert all(r["windows"] == 7 for r in recs[1:4])


def test_run_is_deterministic(tmp_path):
    argv = ("run", "--family", "random_mps", "--n", "7", "--chi", "3", "--trials", "2", "--seed", "9",
            "--noise", "perturb", "--epsilon", "1e-3")
    _, first = run_cli(tmp_path, *argv)
    _, second = run_cli(tmp_path, *argv)
    assert strip_metrics(records_of(first)) == strip_metrics(records_of(second))


def test_certify_rejects_haar(tmp_path):
    code, text = run_cli(tmp_path, "certify", "--family", "haar_random", "--n", "8", "--chi", "2", "--threshold", "0.1")
    assert code == 2
    recs = records_of(text)
    validate(recs)
    assert recs[1]["certificate"]["verdict"] == "reject"


def test_certify_accepts_slightly_perturbed_ghz(tmp_path):
    code, text = run_cli(tmp_path, "certify", "--family", "ghz", "--n", "8", "--chi", "2", "--perturb", "1e-4",
                         "--threshold", "1e-3", "--trials", "3")
    assert code == 0
    validate(records_of(text))


def test_bad_chi_is_config_error(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "run", "--family", "ghz", "--n", "4", "--chi", "0")
    assert code == 1
    assert "chi" in capsys.readouterr().err


def test_missing_n_is_config_error(tmp_path):
    code, _ = run_cli(tmp_path, "run", "--family", "ghz", "--chi", "2")
    assert code == 1


def test_bench_counts_windows(tmp_path):
    code, text = run_cli(tmp_path, "bench", "--chi", "4", "--sizes", "8,16,32")
    assert code == 0
    recs = records_of(text)
    validate(recs)
    rows = [r for r in recs if r["type"] == "bench"]
    assert [r["windows"] for r in rows] == [6, 14, 30]
    assert all(r["settings"] == r["windows"] * 27 for r in rows)
    assert rows[2]["full_tomography_parameters"] == str(4**32 - 1)


def test_demo_recovers_phases(tmp_path, capsys):
    code, text = run_cli(tmp_path, "demo", "--family", "w", "--n", "5", "--trials", "2")
    assert code == 0
    recs = records_of(text)
    validate(recs)
    assert all(r["max_phase_error"] < 1e-8 for r in recs if r["type"] == "demo")
    assert "recovered phases" in capsys.readouterr().err


def test_yaml_config_with_flag_override(tmp_path):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(
        "state:\n  family: ghz\n  n: 6\n  phi: 0.4\n"
        "protocol:\n  chi: 2\n"
        "noise:\n  mode: exact\n"
        "trials: 2\nseed: 3\n"
    )
    code, text = run_cli(tmp_path, "run", "--config", str(cfg), "--trials", "1")
    assert code == 0
    recs = records_of(text)
    assert recs[0]["config"]["trials"] == 1
    assert recs[0]["config"]["state"]["n"] == 6
    assert len([r for r in recs if r["type"] == "trial"]) == 1


def test_yaml_unknown_protocol_key(tmp_path):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text("state:\n  family: ghz\n  n: 4\nprotocol:\n  chi: 2\n  speed: fast\n")
    code, _ = run_cli(tmp_path, "run", "--config", str(cfg))
    assert code == 1


def test_table_format(tmp_path):
    code, text = run_cli(tmp_path, "run", "--family", "ghz", "--n", "5", "--chi", "2", "--trials", "2", "--format", "table")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 2
    assert rows[0]["certificate.verdict"] == "accept"


def test_abort_becomes_reject(tmp_path):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text("protocol:\n  chi: 1\n  abort_threshold: 0.1\n")
    code, text = run_cli(tmp_path, "run", "--config", str(cfg), "--family", "haar_random", "--n", "6")
    assert code == 2
    recs = records_of(text)
    validate(recs)
    assert recs[1]["aborted_at"] == 1


def test_mps_backend_refuses_haar(tmp_path):
    code, _ = run_cli(tmp_path, "run", "--family", "haar_random", "--n", "6", "--chi", "2", "--backend", "mps")
    assert code == 1


def test_worker_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("MPSTOMO_WORKERS", "1")
    code, text = run_cli(tmp_path, "run", "--family", "random_mps", "--n", "6", "--chi", "2", "--trials", "3")
    assert code == 0
    assert records_of(text)[-1]["trials"] == 3
