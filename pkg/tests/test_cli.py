# tests/test_cli.py
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List

import pytest

from app.bootstrap import resolve_thread_count
from cli.parser import command_name, parse_args
from config.app_config import AppConfig
from core.exceptions import ConfigError, UsageError
from main import run
from managers.run_manifest_manager import MANIFEST_FILE, verify_manifest
from utilities.file_handler import load_csv, save_json

QUIET = ["--no-log-file"]


def xarb(capsys: pytest.CaptureFixture[str], *argv: Any) -> tuple[int, Dict[str, Any]]:
    """명령을 실행하고 (종료 코드, stdout JSON)을 돌려준다. stdout이 비어 있으면 {}."""
    capsys.readouterr()
    code = run([str(a) for a in argv] + QUIET)
    out = capsys.readouterr().out.strip()
    return code, json.loads(out) if out else {}


SCENARIO: Dict[str, Any] = {
    "schema_version": 1,
    "seed": 4,
    "horizon": 7200,
    "chains": [
        {"id": "eth", "block_time": 12, "layer": "L1", "gas_fee": 0.001},
        {"id": "arb", "block_time": 1, "gas_fee": 0.0001},
    ],
    "classes": [
        {"name": "ETH", "usd0": 2000, "sigma": 0.4, "is_native": True},
        {"name": "OMNI", "usd0": 0.5, "sigma": 0.8},
    ],
    "pools": [
        {"chain": "eth", "class_a": "ETH", "class_b": "OMNI", "reserve_a": 1000, "reserve_b": 4000000},
        {"chain": "arb", "class_a": "ETH", "class_b": "OMNI", "reserve_a": 1000, "reserve_b": 4000000},
    ],
    "arbitrageurs": [
        {
            "address": "0xA1", "strategy": "Inventory", "source": "eth", "destination": "arb",
            "pair": ["ETH", "OMNI"], "capital": 1000, "latency": 30, "opportunity_rate": 6,
        },
        {
            "address": "0xA2", "strategy": "BridgeMultichain", "source": "eth", "destination": "arb",
            "pair": ["ETH", "OMNI"], "capital": 1000, "latency": 20, "opportunity_rate": 6,
        },
    ],
    "bridges": [
        {"kind": "Multichain", "source": "eth", "destination": "arb",
         "latency_median": 162, "latency_p75": 200, "fee": 0.001},
    ],
    "noise": {"rate": 0.01},
}


@pytest.fixture
def scenario_file(tmp_path: Path) -> Path:
    path = tmp_path / "scenario.json"
    save_json(path, SCENARIO)
    return path


# =============================================================================
# 파서
# =============================================================================
def test_global_options_work_before_and_after_command():
    before = parse_args(["--seed", "3", "--strict", "model", "bridge-cost", "--out", "x"])
    after = parse_args(["model", "bridge-cost", "--out", "x", "--seed", "3", "--strict"])
    for args in (before, after):
        assert args.seed == 3 and args.strict is True
        assert command_name(args) == "model bridge-cost"

    plain = parse_args(["eval", "--matches", "m", "--truth", "t"])
    assert plain.seed is None and plain.threads is None and plain.no_log_file is False


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["teleport"],
        ["model"],
        ["model", "profit-curve"],
        ["account", "--out", "x"],
        ["account", "--matches", "m", "--out", "x", "--volume", "sideways"],
        ["model", "bridge-cost", "--out", "x", "--p", "two"],
    ],
)
def test_bad_arguments_raise_usage_error(argv: List[str]):
    with pytest.raises(UsageError):
        parse_args(argv)


def test_usage_errors_exit_with_one(capsys: pytest.CaptureFixture[str]):
    assert run(["model"]) == 1
    assert "xarb" in capsys.readouterr().err


def test_help_exits_cleanly(capsys: pytest.CaptureFixture[str]):
    assert run(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_thread_count_resolution(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("XARB_THREADS", raising=False)
    assert resolve_thread_count(None) == 1
    assert resolve_thread_count(3) == 3
    monkeypatch.setenv("XARB_THREADS", "6")
    assert resolve_thread_count(None) == 6
    assert resolve_thread_count(2) == 2

    with pytest.raises(ConfigError):
        resolve_thread_count(0)
    monkeypatch.setenv("XARB_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_thread_count(None)


def test_settings_ini_overrides_detector_defaults(tmp_path: Path):
    ini = tmp_path / "settings.ini"
    ini.write_text("[Detector]\nMARGINAL_THRESHOLD = 0.002\nWINDOW_OTHER_SECONDS = 900\n", encoding="utf-8")
    cfg = AppConfig(ini)
    assert str(cfg.marginal_threshold) == "0.002"
    assert cfg.window_other_seconds == 900
    assert cfg.dedup_gap_seconds == 240

    ini.write_text("[Detector]\nDEDUP_GAP_SECONDS = soon\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        _ = AppConfig(ini).dedup_gap_seconds


# =============================================================================
# model
# =============================================================================
def test_model_bridge_cost_writes_table_and_manifest(tmp_path: Path, capsys):
    out = tmp_path / "bc"
    code, _ = xarb(capsys, "model", "bridge-cost", "--delta-grid", "0:2:5", "--out", out)

    assert code == 0
    rows = load_csv(out / "bridge_cost.csv")
    assert rows[0] == ["delta", "bridging_cost"]
    assert len(rows) == 6
    assert float(rows[1][1]) == 0.0
    assert verify_manifest(out) == []


def test_model_cost_diff_reports_crossover(tmp_path: Path, capsys):
    code, summary = xarb(
        capsys, "model", "cost-diff", "--p", 2, "--lam", 1, "--delta", 1, "--mu-grid=-1:0:11", "--out", tmp_path
    )
    assert code == 0
    assert summary["crossover"]["interior"] is True
    assert summary["crossover"]["mu_hat"] == pytest.approx(-0.5726, abs=2e-3)


def test_model_domain_errors_exit_with_one(tmp_path: Path, capsys):
    code, _ = xarb(capsys, "model", "profit-curve", "--p-grid", "3:1:5", "--out", tmp_path)
    assert code == 1
    code, _ = xarb(capsys, "model", "bridge-cost", "--p", 0.5, "--out", tmp_path)
    assert code == 1


def test_threads_zero_is_rejected(tmp_path: Path, capsys):
    code, _ = xarb(capsys, "--threads", 0, "model", "bridge-cost", "--out", tmp_path)
    assert code == 1


# =============================================================================
# simulate → detect → account → eval
# =============================================================================
def test_full_pipeline(tmp_path: Path, scenario_file: Path, capsys):
    sim, det, acc = tmp_path / "sim", tmp_path / "det", tmp_path / "acc"

    code, report = xarb(capsys, "simulate", "--config", scenario_file, "--out", sim)
    assert code == 0
    assert report["planted_total"] > 0
    assert verify_manifest(sim) == []

    code, summary = xarb(capsys, "detect", "--input-dir", sim, "--out", det, "--calibrate", "--threads", 2)
    assert code == 0
    assert summary["matches"] == report["planted_total"]
    assert summary["evaluation"] == {"precision": 1.0, "recall": 1.0, "classification_accuracy": 1.0}
    assert (det / "calibration.csv").exists()
    assert verify_manifest(det) == []

    code, totals = xarb(capsys, "account", "--matches", det / "matches.jsonl", "--input-dir", sim, "--out", acc)
    assert code == 0
    assert totals["matches"] == totals["priced"] == report["planted_total"]
    for name in ("report.json", "profits.csv", "daily.csv", "pairs.csv", "entities.csv", "cdf.csv", MANIFEST_FILE):
        assert (acc / name).exists(), name

    code, scores = xarb(capsys, "eval", "--matches", det / "matches.jsonl", "--truth", sim / "truth.jsonl")
    assert code == 0
    assert scores == {"precision": 1.0, "recall": 1.0, "classification_accuracy": 1.0, "zero_matches": False}


def test_simulate_is_reproducible_and_seed_overridable(tmp_path: Path, scenario_file: Path, capsys):
    for name in ("a", "b"):
        assert xarb(capsys, "simulate", "--config", scenario_file, "--out", tmp_path / name)[0] == 0
    assert xarb(capsys, "--seed", 99, "simulate", "--config", scenario_file, "--out", tmp_path / "c")[0] == 0

    swaps = [(tmp_path / n / "swaps.jsonl").read_bytes() for n in ("a", "b", "c")]
    assert swaps[0] == swaps[1]
    assert swaps[0] != swaps[2]


def test_simulate_bad_config_leaves_no_output(tmp_path: Path, capsys):
    bad = tmp_path / "bad.json"
    save_json(bad, {**SCENARIO, "schema_version": 7})
    code, _ = xarb(capsys, "simulate", "--config", bad, "--out", tmp_path / "sim")
    assert code == 1
    assert not (tmp_path / "sim").exists()


def test_detect_missing_inputs_is_a_data_error(tmp_path: Path, capsys):
    code, _ = xarb(capsys, "detect", "--input-dir", tmp_path / "nowhere", "--out", tmp_path / "det")
    assert code == 2


def test_detect_needs_registry_without_input_dir(tmp_path: Path, capsys):
    code, _ = xarb(capsys, "detect", "--swaps", tmp_path / "s.jsonl", "--out", tmp_path / "det")
    assert code == 1


def test_strict_mode_stops_on_bad_line(tmp_path: Path, scenario_file: Path, capsys):
    sim = tmp_path / "sim"
    assert xarb(capsys, "simulate", "--config", scenario_file, "--out", sim)[0] == 0
    with open(sim / "swaps.jsonl", "a", encoding="utf-8") as f:
        f.write('{"chain": "eth"}\n')

    lenient, summary = xarb(capsys, "detect", "--input-dir", sim, "--out", tmp_path / "d1")
    assert lenient == 0
    skipped = json.loads((tmp_path / "d1" / "detect_report.json").read_text(encoding="utf-8"))["inputs"]
    assert any(r["skipped"] == 1 for r in skipped)

    strict, _ = xarb(capsys, "--strict", "detect", "--input-dir", sim, "--out", tmp_path / "d2")
    assert strict == 2
    assert not (tmp_path / "d2").exists()


def test_detect_bad_calibrate_leaves_no_output(tmp_path: Path, scenario_file: Path, capsys):
    sim = tmp_path / "sim"
    assert xarb(capsys, "simulate", "--config", scenario_file, "--out", sim)[0] == 0

    code, _ = xarb(capsys, "detect", "--input-dir", sim, "--calibrate", "abc", "--out", tmp_path / "det")
    assert code == 1
    assert not (tmp_path / "det").exists()
    assert not list(tmp_path.glob(".det.stage*"))


def test_account_missing_matches_leaves_no_output(tmp_path: Path, scenario_file: Path, capsys):
    sim = tmp_path / "sim"
    assert xarb(capsys, "simulate", "--config", scenario_file, "--out", sim)[0] == 0

    code, _ = xarb(
        capsys, "account", "--matches", tmp_path / "none.jsonl", "--input-dir", sim, "--out", tmp_path / "acc"
    )
    assert code == 2
    assert not (tmp_path / "acc").exists()
