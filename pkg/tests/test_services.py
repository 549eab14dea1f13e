# tests/test_services.py
from __future__ import annotations

import threading
import time
from decimal import Decimal
from pathlib import Path
from typing import List

import pytest

from core.exceptions import ConfigError
from domain import model
from domain.bridgelink import INVENTORY, ClassifiedMatch, ExecutionClass, ExecutionMethod
from domain.detector import ArbMatch, DetectorConfig, PairClass
from domain.scenario import AgentStrategy, PlantedArbitrage
from domain.stochastic import ChunkSpec, Moments, plan_chunks
from services.base_service import BaseService
from services.detection_service import DetectionInputs, evaluate, load_detector_config, parse_detector_config
from services.model_service import VALIDATE_HEADER, Grid, ModelService, ValidationPlan
from services.simulation_service import SimulationService
from utilities.file_handler import load_csv, save_json
from workers.base_worker import BaseWorker
from workers.path_worker import PathChunkWorker


class _Echo(BaseWorker[int]):
    def __init__(self, value: int, delay: float = 0.0, fail: bool = False, bus=None):
        super().__init__(bus)
        self.value = value
        self.delay = delay
        self.fail = fail

    def process(self) -> int:
        time.sleep(self.delay)
        if self.fail:
            raise RuntimeError(f"worker {self.value} failed")
        return self.value


# =============================================================================
# BaseService / 워커
# =============================================================================
def test_run_workers_keeps_submission_order(bus):
    service = BaseService(bus, threads=4)
    # 늦게 제출한 워커가 먼저 끝나도 결과 순서는 제출 순서
    workers = [_Echo(i, delay=0.02 * (5 - i), bus=bus) for i in range(6)]
    assert service.run_workers(workers) == list(range(6))


def test_run_workers_reraises_first_failure_after_all_finish(bus):
    finished: List[int] = []
    workers = [_Echo(i, delay=0.01, fail=i in (1, 3), bus=bus) for i in range(5)]
    for w in workers:
        w.worker_finished.connect(lambda w=w: finished.append(w.value))
    errors: List[str] = []
    bus.log.message.connect(lambda source, message, level: errors.append(level))

    with pytest.raises(RuntimeError, match="worker 1 failed"):
        BaseService(bus, threads=3).run_workers(workers)

    assert sorted(finished) == [0, 2, 4]
    assert "ERROR" in errors


def test_single_thread_runs_on_caller_thread(bus):
    seen: List[str] = []

    class _Where(BaseWorker[None]):
        def process(self) -> None:
            seen.append(threading.current_thread().name)

    BaseService(bus, threads=1).run_workers([_Where(bus), _Where(bus)])
    assert seen == [threading.current_thread().name] * 2


def test_threads_are_clamped_to_one(bus):
    assert BaseService(bus, threads=0).threads == 1
    assert BaseService(bus, threads=-3).threads == 1


def test_worker_signals(bus):
    started, finished, failed = [], [], []
    ok = _Echo(1, bus=bus)
    ok.worker_started.connect(lambda: started.append(1))
    ok.worker_finished.connect(lambda: finished.append(1))
    assert ok.run() == 1

    bad = _Echo(2, fail=True, bus=bus)
    bad.worker_failed.connect(failed.append)
    with pytest.raises(RuntimeError):
        bad.run()

    assert started == [1] and finished == [1]
    assert failed == ["worker 2 failed"]


def test_mapper_matches_sequential_map(bus):
    def fn(chunk: ChunkSpec) -> Moments:
        return Moments(chunk.size, (float(chunk.index),), ((0.0,),))

    chunks = plan_chunks(1000, 128)
    threaded = BaseService(bus, threads=4).mapper(PathChunkWorker)(fn, chunks)
    assert threaded == [fn(c) for c in chunks]


def test_records_skipped_only_emits_nonzero(bus):
    events = []
    bus.pipeline.records_skipped.connect(lambda *args: events.append(args))
    service = BaseService(bus)

    service.records_skipped("load_swaps", "schema", 0)
    service.records_skipped("load_swaps", "schema", 2)
    assert events == [("load_swaps", "schema", 2)]


# =============================================================================
# 탐지기 설정 / 입력
# =============================================================================
def test_parse_detector_config_overrides_base():
    cfg = parse_detector_config({"marginal_threshold": "0.004", "window_other_seconds": 600})
    assert cfg.marginal_threshold == Decimal("0.004")
    assert cfg.window_other_seconds == 600
    assert cfg.dedup_marginal == DetectorConfig().dedup_marginal

    base = DetectorConfig(clock_skew_tolerance=5)
    assert parse_detector_config({}, base) == base


@pytest.mark.parametrize(
    "obj, message",
    [
        ({"marginal_treshold": 0.004}, "unknown detector settings"),
        ({"dedup_gap_seconds": True}, "must be an integer"),
        ({"window_stable_seconds": 12.5}, "must be an integer"),
        ({"marginal_threshold": "abc"}, "not a number"),
        ({"dedup_marginal": "0.01"}, "dedup_marginal"),
        ({"window_stable_seconds": 0}, "time windows"),
    ],
)
def test_parse_detector_config_rejects(obj, message):
    with pytest.raises(ConfigError, match=message):
        parse_detector_config(obj)


def test_load_detector_config_requires_object(tmp_path: Path):
    path = tmp_path / "detector.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON object"):
        load_detector_config(path)

    save_json(path, {"clock_skew_tolerance": 3})
    assert load_detector_config(path).clock_skew_tolerance == 3


def test_detection_inputs_need_swaps(tmp_path: Path):
    with pytest.raises(ConfigError, match="swaps"):
        DetectionInputs(equivalence=tmp_path / "e.csv", labels=tmp_path / "l.csv")


def test_detection_inputs_from_dir_skips_missing_optional_files(tmp_path: Path):
    (tmp_path / "truth.jsonl").write_text("", encoding="utf-8")
    (tmp_path / "transfers.jsonl").write_text("", encoding="utf-8")

    inputs = DetectionInputs.from_dir(tmp_path)
    assert inputs.swaps == tmp_path / "swaps.jsonl"
    assert inputs.transfers == tmp_path / "transfers.jsonl"
    assert inputs.native_links is None and inputs.chains is None
    assert inputs.truth == tmp_path / "truth.jsonl"

    assert DetectionInputs.from_dir(tmp_path, with_truth=False).truth is None
    assert tmp_path / "truth.jsonl" not in DetectionInputs.from_dir(tmp_path, with_truth=False).paths()


# =============================================================================
# 평가
# =============================================================================
def _match(make_swap, n: int) -> ArbMatch:
    leg1 = make_swap("eth", f"0x{n}a", 100 * n, "ETH", "OMNI", "1", "1000")
    leg2 = make_swap("arb", f"0x{n}b", 100 * n + 10, "OMNI", "ETH", "1000", "1.01")
    return ArbMatch(leg1, leg2, Decimal(0), 10, PairClass.OTHER, "0xbot", 1, 0)


def _planted(m: ArbMatch, strategy: AgentStrategy = AgentStrategy.INVENTORY) -> PlantedArbitrage:
    return PlantedArbitrage(m.leg1.key, m.leg2.key, strategy, "0xbot")


def test_evaluate_counts_hits_misses_and_false_positives(make_swap):
    hit, wrong_method, false_pos, missed = (_match(make_swap, n) for n in range(1, 5))
    native = ExecutionClass(ExecutionMethod.NATIVE_BRIDGE)
    classified = [
        ClassifiedMatch(hit, INVENTORY),
        ClassifiedMatch(wrong_method, native),
        ClassifiedMatch(false_pos, INVENTORY),
    ]
    truth = [_planted(hit), _planted(wrong_method, AgentStrategy.BRIDGE_MULTICHAIN), _planted(missed)]

    result = evaluate(classified, truth)
    assert result.precision == pytest.approx(2 / 3)
    assert result.recall == pytest.approx(2 / 3)
    assert result.classification_accuracy == 0.5
    assert result.true_positives == 2 and result.correctly_classified == 1
    assert result.misclassified == ((wrong_method.leg1.key, wrong_method.leg2.key, "MultichainBridge", "NativeBridge"),)
    assert not result.zero_matches


def test_evaluate_without_matches_flags_zero_matches(make_swap):
    truth = [_planted(_match(make_swap, 1))]
    result = evaluate([], truth)

    assert result.zero_matches
    assert result.precision == 1.0
    assert result.recall == 0.0
    assert result.to_dict()["zero_matches"] is True


# =============================================================================
# 모델 서비스
# =============================================================================
def test_grid_parse_and_values():
    assert Grid.parse("0:1:5").values() == [0.0, 0.25, 0.5, 0.75, 1.0]
    for text in ("0:1", "a:b:c", "1:0:5", "0:1:1"):
        with pytest.raises(ConfigError):
            Grid.parse(text)


def test_profit_curve_adds_bridge_column_only_with_mu_and_delta(bus):
    service = ModelService(bus)
    plain = service.profit_curve(Grid(1.0, 3.0, 3), 1e7)
    assert plain[0] == ["p", "frictionless_profit"]
    assert len(plain) == 4
    assert float(plain[1][1]) == 0.0

    bridged = service.profit_curve(Grid(1.0, 3.0, 3), 1e7, mu=-0.0625, delta=1.0)
    assert bridged[0][-1] == "expected_bridge_profit"
    assert float(bridged[2][2]) == pytest.approx(model.expected_bridge_profit(2.0, -0.0625, 1.0, 1e7))


def test_threshold_curves_skip_undefined_points(bus):
    lam_rows, delta_rows = ModelService(bus).threshold_curves(2.0, -0.0625, Grid(0.0, 2.0, 5), Grid(0.1, 4.0, 4))

    # Δ = 0 과 M <= 0 인 λ = 0.1 은 빠진다
    assert [float(r[0]) for r in lam_rows[1:]] == [0.5, 1.0, 1.5, 2.0]
    assert len(delta_rows) == 4
    assert float(lam_rows[2][1]) == pytest.approx(model.lambda_threshold(2.0, -0.0625, 1.0))


def test_crossover_picks_branch_by_hypothesis(bus):
    service = ModelService(bus)
    inside = service.crossover(2.0, 0.25, 1.0, mu_lo=-1.0)
    assert inside is not None and inside.interior is False and inside.mu_hat == 0.0

    outside = service.crossover(2.0, 1.0, 1.0, mu_lo=-1.0)
    assert outside is not None
    assert outside.interior and outside.mu_hat == pytest.approx(-0.5726, abs=2e-3)

    # 가정이 깨졌지만 [-0.3, 0) 안에는 교차점이 없다
    assert service.crossover(2.0, 1.0, 1.0, mu_lo=-0.3) is None


def test_validate_is_thread_count_independent(bus, tmp_path: Path):
    plan = ValidationPlan(
        bridge_p=(2.0,),
        bridge_mu=(-0.0625,),
        bridge_delta=(0.5,),
        inventory_k=(0.0,),
        inventory_sigma=(0.1,),
        inventory_lam=(1.0,),
        bridge_paths=40_000,
        inventory_paths=4_000,
    )
    one = ModelService(bus, threads=1, chunk_paths=5_000).validate(plan, seed=11)
    many = ModelService(bus, threads=4, chunk_paths=5_000).validate(plan, seed=11)

    assert [r.case for r in one] == ["bridge", "inventory"]
    assert [r.to_row() for r in one] == [r.to_row() for r in many]
    assert one[0].closed_form == model.expected_bridge_profit(2.0, -0.0625, 0.5, 1e7)
    assert one[1].closed_form == pytest.approx(0.0625)

    path = ModelService(bus).write_validation(tmp_path, one)
    rows = load_csv(path)
    assert rows[0] == list(VALIDATE_HEADER)
    assert len(rows) == 3


# =============================================================================
# 시뮬레이션 서비스
# =============================================================================
def test_simulation_service_overrides_seed_and_collision_rate(bus, tmp_path: Path):
    path = tmp_path / "scenario.json"
    save_json(
        path,
        {
            "schema_version": 1,
            "seed": 1,
            "chains": [{"id": "eth", "block_time": 12, "layer": "L1"}, {"id": "arb", "block_time": 1}],
            "classes": [{"name": "ETH", "usd0": 2000, "is_native": True}],
        },
    )
    service = SimulationService(bus)

    assert service.load(path).seed == 1
    overridden = service.load(path, seed=9, collision_rate=0.25)
    assert overridden.seed == 9 and overridden.collision_rate == 0.25

    with pytest.raises(ConfigError):
        service.load(path, collision_rate=2.0)
